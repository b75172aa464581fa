//! Run configuration: JSON parsing with path-tagged violations, scenario
//! presets, and construction of the initial state.
//!
//! A document may name a `preset`; the preset expands to a full document and
//! every key given explicitly overrides the expanded value.

use serde::{Deserialize, Serialize, Serializer};
use serde_json::{json, Map, Value};

use crate::coupling::{SimState, StepParams};
use crate::diagnostics::BoundTolerances;
use crate::error::{ConfigViolation, Result, SimError};
use crate::field_solver::InvariantGrid;
use crate::horizon::{check_assumptions_with, AssumptionReport, HorizonOptions, InitialDataSummary, ProfileNorms};
use crate::interp::Interpolation;
use crate::kinetic::{compute_moments, DistributionGrid, PhaseSpaceGrid};

pub const PRESETS: [&str; 6] =
    ["vacuum", "simple_wave", "simple_wave_mirror", "small_coupled", "blowup_guard", "a3_violation"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub v_max: f64,
    pub nv1: usize,
    pub nv2: usize,
}

impl GridConfig {
    pub fn build(&self) -> Result<PhaseSpaceGrid> {
        PhaseSpaceGrid::new(self.x_min, self.x_max, self.nx, self.v_max, self.nv1, self.nv2)
    }
}

/// Either a CFL number (step = cfl · dx) or a fixed step; never both.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeConfig {
    pub t_end: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cfl: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl TimeConfig {
    /// Nominal step before it is shrunk to divide the run length evenly.
    pub fn nominal_dt(&self, dx: f64) -> f64 {
        match (self.dt, self.cfl) {
            (Some(dt), _) => dt,
            (None, Some(c)) => c * dx,
            (None, None) => 0.5 * dx,
        }
    }
}

/// `amplitude · (1 − ((x − center)/width)²)^power` on `|x − center| < width`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub power: u32,
}

pub fn bump_profile(r: f64, power: u32) -> f64 {
    if r.abs() < 1.0 {
        (1.0 - r * r).powi(power as i32)
    } else {
        0.0
    }
}

impl Bump {
    pub fn eval(&self, x: f64) -> f64 {
        self.amplitude * bump_profile((x - self.center) / self.width, self.power)
    }
}

/// Product of an x-bump and a radial v-bump.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseBump {
    pub amplitude: f64,
    pub x_center: f64,
    pub x_width: f64,
    pub v1_center: f64,
    pub v2_center: f64,
    pub v_width: f64,
    pub power: u32,
}

impl PhaseBump {
    pub fn eval(&self, x: f64, v1: f64, v2: f64) -> f64 {
        let rv = (v1 - self.v1_center).hypot(v2 - self.v2_center) / self.v_width;
        self.amplitude
            * bump_profile((x - self.x_center) / self.x_width, self.power)
            * bump_profile(rv, self.power)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Background {
    /// `n(x) = ∫ f^in(x, v) dv`, so `ρ ≡ 0` initially.
    Auto,
    None,
    /// Sum of bumps rescaled to carry the particle mass.
    Bumps(Vec<Bump>),
}

impl Serialize for Background {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Background::Auto => s.serialize_str("auto"),
            Background::None => s.serialize_str("none"),
            Background::Bumps(b) => b.serialize(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InitialConfig {
    pub f: Vec<PhaseBump>,
    pub theta2: Vec<Bump>,
    pub theta_b: Vec<Bump>,
    pub background: Background,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Direct,
    Picard,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PicardConfig {
    /// Defaults to the run length.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    pub mode: Mode,
    pub interpolation: Interpolation,
    pub picard: PicardConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub eps_guard: f64,
    pub separation_floor: f64,
    /// Relative to `‖f^in‖∞`: smaller values of `f` are outside the support.
    pub support_threshold: f64,
    /// Relative to `‖f^in‖∞` for `f` and to `π/2` for the invariants.
    pub boundary_tol: f64,
    /// Largest admissible `|∫ρ dx|`.
    pub neutrality: f64,
    pub interp_overshoot: f64,
    pub bound_tol: f64,
    pub envelope_tol: f64,
}

impl Tolerances {
    pub fn bounds(&self) -> BoundTolerances {
        BoundTolerances {
            interp_overshoot: self.interp_overshoot,
            bound_tol: self.bound_tol,
            envelope_tol: self.envelope_tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// Write a frame every this many steps (the last step is always written).
    pub every: usize,
    /// Requested snapshot times, matched to the nearest step.
    pub snapshots: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub initial: InitialConfig,
    pub solver: SolverConfig,
    pub tolerances: Tolerances,
    pub horizon: HorizonOptions,
    pub output: OutputConfig,
    pub override_certified: bool,
    /// Replaces the measured initial-data norms in the `horizon` command.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<InitialDataSummary>,
}

impl SimConfig {
    /// Pretty JSON; parsing it again gives the same text.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn step_params(&self, dt: f64, f_sup: f64) -> StepParams {
        let t = &self.tolerances;
        StepParams {
            dt,
            kind: self.solver.interpolation,
            eps_guard: t.eps_guard,
            separation_floor: t.separation_floor,
            support_threshold: t.support_threshold * f_sup,
            boundary_tol: t.boundary_tol * f_sup,
            field_boundary_tol: t.boundary_tol * std::f64::consts::FRAC_PI_2,
        }
    }
}

/// Full document for a named preset.
pub fn preset_document(name: &str) -> Option<Value> {
    let doc = match name {
        "vacuum" => json!({
            "grid": {"x_min": -2.0, "x_max": 2.0, "nx": 64, "v_max": 1.0, "nv1": 8, "nv2": 8},
            "time": {"t_end": 1.0, "cfl": 0.5},
            "initial": {"f": [], "theta2": [], "theta_b": [], "background": "none"}
        }),
        // α ≡ 0, β = 0.3 · (1 − x²)³ travelling right at unit speed
        "simple_wave" => json!({
            "grid": {"x_min": -3.0, "x_max": 3.0, "nx": 256, "v_max": 1.0, "nv1": 8, "nv2": 8},
            "time": {"t_end": 1.0, "cfl": 0.5},
            "initial": {
                "f": [],
                "theta2": [{"amplitude": 0.15, "center": 0.0, "width": 1.0, "power": 3}],
                "theta_b": [{"amplitude": 0.15, "center": 0.0, "width": 1.0, "power": 3}],
                "background": "none"
            }
        }),
        "simple_wave_mirror" => json!({
            "grid": {"x_min": -3.0, "x_max": 3.0, "nx": 256, "v_max": 1.0, "nv1": 8, "nv2": 8},
            "time": {"t_end": 1.0, "cfl": 0.5},
            "initial": {
                "f": [],
                "theta2": [{"amplitude": 0.15, "center": 0.0, "width": 1.0, "power": 3}],
                "theta_b": [{"amplitude": -0.15, "center": 0.0, "width": 1.0, "power": 3}],
                "background": "none"
            }
        }),
        "small_coupled" => json!({
            "grid": {"x_min": -4.0, "x_max": 4.0, "nx": 128, "v_max": 2.5, "nv1": 48, "nv2": 48},
            "time": {"t_end": 0.5, "cfl": 0.5},
            "initial": {
                "f": [{"amplitude": 0.05, "x_center": 0.0, "x_width": 1.2,
                       "v1_center": 0.06, "v2_center": 0.08, "v_width": 0.4}],
                "theta2": [{"amplitude": 0.1, "center": -0.4, "width": 1.2}],
                "theta_b": [{"amplitude": 0.1, "center": 0.5, "width": 1.0}],
                "background": [{"amplitude": 1.0, "center": 0.3, "width": 1.2}]
            },
            "solver": {"picard": {"t_final": 0.2}}
        }),
        // θ_B just below π/2 where a separated charge pair pumps θ₂; particles
        // are nearly at rest so the momentum support stays tiny
        "blowup_guard" => json!({
            "grid": {"x_min": -2.0, "x_max": 2.0, "nx": 80, "v_max": 0.02, "nv1": 16, "nv2": 16},
            "time": {"t_end": 0.5, "cfl": 0.5},
            "initial": {
                "f": [{"amplitude": 3.0e4, "x_center": -0.5, "x_width": 0.4,
                       "v1_center": 0.0, "v2_center": 0.0, "v_width": 0.008}],
                "theta2": [],
                "theta_b": [{"amplitude": 1.5607963267948966, "center": 0.4, "width": 1.0}],
                "background": [{"amplitude": 1.0, "center": 0.4, "width": 0.4}]
            },
            "override_certified": true
        }),
        "a3_violation" => json!({
            "grid": {"x_min": -4.0, "x_max": 4.0, "nx": 64, "v_max": 2.0, "nv1": 24, "nv2": 24},
            "time": {"t_end": 0.5, "cfl": 0.5},
            "initial": {
                "f": [{"amplitude": 0.05, "x_center": 0.0, "x_width": 1.0,
                       "v1_center": 0.0, "v2_center": 0.0, "v_width": 0.6}],
                "theta2": [{"amplitude": 0.7, "center": 0.0, "width": 1.0}],
                "theta_b": [{"amplitude": 0.5, "center": 0.5, "width": 1.0}],
                "background": "auto"
            }
        }),
        _ => return None,
    };
    Some(doc)
}

/// Recursive object merge; `top` wins on every leaf.
fn merge(base: &mut Value, top: &Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

struct Reader {
    errs: Vec<ConfigViolation>,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

impl Reader {
    fn err(&mut self, path: impl Into<String>, message: impl Into<String>) {
        let path = path.into();
        // one message per field is enough
        if !self.errs.iter().any(|e| e.path == path) {
            self.errs.push(ConfigViolation { path, message: message.into() });
        }
    }

    fn object<'a>(&mut self, v: Option<&'a Value>, path: &str, allowed: &[&str]) -> Option<&'a Map<String, Value>> {
        match v {
            None | Some(Value::Null) => None,
            Some(Value::Object(m)) => {
                for k in m.keys() {
                    if !allowed.contains(&k.as_str()) {
                        self.err(join(path, k), format!("unknown field (expected one of {})", allowed.join(", ")));
                    }
                }
                Some(m)
            }
            Some(_) => {
                self.err(path, "expected an object");
                None
            }
        }
    }

    fn f64(&mut self, m: Option<&Map<String, Value>>, path: &str, key: &str, default: Option<f64>) -> f64 {
        let p = join(path, key);
        match m.and_then(|m| m.get(key)) {
            None | Some(Value::Null) => match default {
                Some(d) => d,
                None => {
                    self.err(p, "missing required number");
                    f64::NAN
                }
            },
            Some(Value::Number(n)) => n.as_f64().unwrap_or(f64::NAN),
            Some(_) => {
                self.err(p, "expected a number");
                f64::NAN
            }
        }
    }

    fn opt_f64(&mut self, m: Option<&Map<String, Value>>, path: &str, key: &str) -> Option<f64> {
        match m.and_then(|m| m.get(key)) {
            None | Some(Value::Null) => None,
            Some(_) => Some(self.f64(m, path, key, None)),
        }
    }

    fn usize(&mut self, m: Option<&Map<String, Value>>, path: &str, key: &str, default: usize) -> usize {
        match m.and_then(|m| m.get(key)) {
            None | Some(Value::Null) => default,
            Some(Value::Number(n)) if n.as_u64().is_some() => n.as_u64().unwrap() as usize,
            Some(_) => {
                self.err(join(path, key), "expected a nonnegative integer");
                default
            }
        }
    }

    fn bool(&mut self, m: Option<&Map<String, Value>>, path: &str, key: &str, default: bool) -> bool {
        match m.and_then(|m| m.get(key)) {
            None | Some(Value::Null) => default,
            Some(Value::Bool(b)) => *b,
            Some(_) => {
                self.err(join(path, key), "expected true or false");
                default
            }
        }
    }

    fn string(&mut self, m: Option<&Map<String, Value>>, path: &str, key: &str) -> Option<String> {
        match m.and_then(|m| m.get(key)) {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.err(join(path, key), "expected a string");
                None
            }
        }
    }

    fn array<'a>(&mut self, m: Option<&'a Map<String, Value>>, path: &str, key: &str) -> &'a [Value] {
        match m.and_then(|m| m.get(key)) {
            None | Some(Value::Null) => &[],
            Some(Value::Array(a)) => a,
            Some(_) => {
                self.err(join(path, key), "expected an array");
                &[]
            }
        }
    }

    fn bump(&mut self, v: &Value, path: &str) -> Bump {
        let m = self.object(Some(v), path, &["amplitude", "center", "width", "power"]);
        if m.is_none() && !v.is_object() {
            self.err(path, "expected an object");
        }
        Bump {
            amplitude: self.f64(m, path, "amplitude", None),
            center: self.f64(m, path, "center", Some(0.0)),
            width: self.f64(m, path, "width", None),
            power: self.usize(m, path, "power", 2) as u32,
        }
    }

    fn bumps(&mut self, m: Option<&Map<String, Value>>, path: &str, key: &str) -> Vec<Bump> {
        let p = join(path, key);
        self.array(m, path, key).iter().enumerate().map(|(i, v)| self.bump(v, &format!("{p}[{i}]"))).collect()
    }

    fn phase_bump(&mut self, v: &Value, path: &str) -> PhaseBump {
        let m = self.object(
            Some(v),
            path,
            &["amplitude", "x_center", "x_width", "v1_center", "v2_center", "v_width", "power"],
        );
        PhaseBump {
            amplitude: self.f64(m, path, "amplitude", None),
            x_center: self.f64(m, path, "x_center", Some(0.0)),
            x_width: self.f64(m, path, "x_width", None),
            v1_center: self.f64(m, path, "v1_center", Some(0.0)),
            v2_center: self.f64(m, path, "v2_center", Some(0.0)),
            v_width: self.f64(m, path, "v_width", None),
            power: self.usize(m, path, "power", 2) as u32,
        }
    }
}

/// Parses and validates a configuration document.
///
/// Every problem found is reported, each with the dotted path of its field.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let user: Value = serde_json::from_str(text).map_err(|e| {
        SimError::Config(vec![ConfigViolation { path: String::new(), message: format!("malformed JSON: {e}") }])
    })?;
    let mut r = Reader { errs: Vec::new() };
    let top = r.object(
        Some(&user),
        "",
        &["preset", "grid", "time", "initial", "solver", "tolerances", "horizon", "output", "override_certified", "summary"],
    );
    if top.is_none() {
        r.err("", "expected a JSON object");
        return Err(SimError::Config(r.errs));
    }
    let preset = r.string(top, "", "preset");
    let mut doc = json!({});
    if let Some(name) = &preset {
        match preset_document(name) {
            Some(d) => doc = d,
            None => r.err("preset", format!("unknown preset {name:?} (known: {})", PRESETS.join(", "))),
        }
    }
    // a step given explicitly replaces the preset's choice of step
    let user_time = user.get("time").and_then(Value::as_object);
    if let (Some(ut), Some(dt)) = (user_time, doc.get_mut("time").and_then(Value::as_object_mut)) {
        for (a, b) in [("dt", "cfl"), ("cfl", "dt")] {
            if ut.contains_key(a) && !ut.contains_key(b) {
                dt.remove(b);
            }
        }
    }
    merge(&mut doc, &user);
    let top = doc.as_object();

    let gm = r.object(top.and_then(|t| t.get("grid")), "grid", &["x_min", "x_max", "nx", "v_max", "nv1", "nv2"]);
    let grid = GridConfig {
        x_min: r.f64(gm, "grid", "x_min", Some(-4.0)),
        x_max: r.f64(gm, "grid", "x_max", Some(4.0)),
        nx: r.usize(gm, "grid", "nx", 128),
        v_max: r.f64(gm, "grid", "v_max", Some(2.5)),
        nv1: r.usize(gm, "grid", "nv1", 32),
        nv2: r.usize(gm, "grid", "nv2", 32),
    };

    let tm = r.object(top.and_then(|t| t.get("time")), "time", &["t_end", "cfl", "dt"]);
    let mut time = TimeConfig {
        t_end: r.f64(tm, "time", "t_end", Some(1.0)),
        cfl: r.opt_f64(tm, "time", "cfl"),
        dt: r.opt_f64(tm, "time", "dt"),
    };
    if time.cfl.is_none() && time.dt.is_none() {
        time.cfl = Some(0.5);
    }

    let im = r.object(top.and_then(|t| t.get("initial")), "initial", &["f", "theta2", "theta_b", "background"]);
    let f = r
        .array(im, "initial", "f")
        .iter()
        .enumerate()
        .map(|(i, v)| r.phase_bump(v, &format!("initial.f[{i}]")))
        .collect();
    let theta2 = r.bumps(im, "initial", "theta2");
    let theta_b = r.bumps(im, "initial", "theta_b");
    let background = match im.and_then(|m| m.get("background")) {
        None | Some(Value::Null) => Background::Auto,
        Some(Value::String(s)) if s == "auto" => Background::Auto,
        Some(Value::String(s)) if s == "none" => Background::None,
        Some(Value::Array(_)) => Background::Bumps(r.bumps(im, "initial", "background")),
        Some(_) => {
            r.err("initial.background", "expected \"auto\", \"none\" or an array of bumps");
            Background::Auto
        }
    };
    let initial = InitialConfig { f, theta2, theta_b, background };

    let sm = r.object(top.and_then(|t| t.get("solver")), "solver", &["mode", "interpolation", "picard"]);
    let mode = match r.string(sm, "solver", "mode").as_deref() {
        None | Some("direct") => Mode::Direct,
        Some("picard") => Mode::Picard,
        Some(other) => {
            r.err("solver.mode", format!("unknown mode {other:?} (expected direct or picard)"));
            Mode::Direct
        }
    };
    let interpolation = match r.string(sm, "solver", "interpolation").as_deref() {
        None | Some("cubic") => Interpolation::Cubic,
        Some("linear") => Interpolation::Linear,
        Some("monotone_cubic") => Interpolation::MonotoneCubic,
        Some(other) => {
            r.err("solver.interpolation", format!("unknown interpolation {other:?} (expected linear, cubic or monotone_cubic)"));
            Interpolation::Cubic
        }
    };
    let pm = r.object(sm.and_then(|s| s.get("picard")), "solver.picard", &["t_final", "tol", "max_iter"]);
    let picard = PicardConfig {
        t_final: r.opt_f64(pm, "solver.picard", "t_final"),
        tol: r.f64(pm, "solver.picard", "tol", Some(1e-10)),
        max_iter: r.usize(pm, "solver.picard", "max_iter", 30),
    };
    let solver = SolverConfig { mode, interpolation, picard };

    let tk = [
        "eps_guard",
        "separation_floor",
        "support_threshold",
        "boundary_tol",
        "neutrality",
        "interp_overshoot",
        "bound_tol",
        "envelope_tol",
    ];
    let to = r.object(top.and_then(|t| t.get("tolerances")), "tolerances", &tk);
    let b = BoundTolerances::default();
    let tolerances = Tolerances {
        eps_guard: r.f64(to, "tolerances", "eps_guard", Some(1e-3)),
        separation_floor: r.f64(to, "tolerances", "separation_floor", Some(1e-6)),
        support_threshold: r.f64(to, "tolerances", "support_threshold", Some(1e-8)),
        boundary_tol: r.f64(to, "tolerances", "boundary_tol", Some(1e-6)),
        neutrality: r.f64(to, "tolerances", "neutrality", Some(1e-10)),
        interp_overshoot: r.f64(to, "tolerances", "interp_overshoot", Some(b.interp_overshoot)),
        bound_tol: r.f64(to, "tolerances", "bound_tol", Some(b.bound_tol)),
        envelope_tol: r.f64(to, "tolerances", "envelope_tol", Some(b.envelope_tol)),
    };

    let hm = r.object(top.and_then(|t| t.get("horizon")), "horizon", &["dt", "t_max", "safety"]);
    let hd = HorizonOptions::default();
    let horizon = HorizonOptions {
        dt: r.f64(hm, "horizon", "dt", Some(hd.dt)),
        t_max: r.f64(hm, "horizon", "t_max", Some(hd.t_max)),
        safety: r.f64(hm, "horizon", "safety", Some(hd.safety)),
    };

    let om = r.object(top.and_then(|t| t.get("output")), "output", &["dir", "every", "snapshots"]);
    let dir = r.string(om, "output", "dir");
    let every = r.usize(om, "output", "every", 1);
    let snapshots = r
        .array(om, "output", "snapshots")
        .iter()
        .enumerate()
        .map(|(i, v)| match v.as_f64() {
            Some(t) => t,
            None => {
                r.err(format!("output.snapshots[{i}]"), "expected a number");
                f64::NAN
            }
        })
        .collect();
    let output = OutputConfig { dir, every, snapshots };

    let override_certified = r.bool(top, "", "override_certified", false);
    let summary = match top.and_then(|t| t.get("summary")) {
        None | Some(Value::Null) => None,
        Some(v) => match serde_json::from_value::<InitialDataSummary>(v.clone()) {
            Ok(s) => Some(s),
            Err(e) => {
                r.err("summary", format!("expected the seven initial-data norms: {e}"));
                None
            }
        },
    };

    let cfg = SimConfig { preset, grid, time, initial, solver, tolerances, horizon, output, override_certified, summary };
    for v in validate(&cfg) {
        r.err(v.path, v.message);
    }
    if r.errs.is_empty() {
        Ok(cfg)
    } else {
        Err(SimError::Config(r.errs))
    }
}

/// Semantic checks on an already typed configuration.
pub fn validate(c: &SimConfig) -> Vec<ConfigViolation> {
    let mut out = Vec::new();
    let mut bad = |path: String, msg: String| out.push(ConfigViolation { path, message: msg });
    let positive = |v: f64| v.is_finite() && v > 0.0;

    let g = &c.grid;
    for (k, n) in [("nx", g.nx), ("nv1", g.nv1), ("nv2", g.nv2)] {
        if n < 4 {
            bad(format!("grid.{k}"), format!("grid too coarse: {k} = {n} (need at least 4)"));
        }
    }
    if !(g.x_min.is_finite() && g.x_max.is_finite() && g.x_min < g.x_max) {
        bad("grid.x_max".into(), format!("need finite x_min < x_max (got {}, {})", g.x_min, g.x_max));
    }
    if !positive(g.v_max) {
        bad("grid.v_max".into(), format!("must be positive (got {})", g.v_max));
    }

    let t = &c.time;
    if !(t.t_end.is_finite() && t.t_end >= 0.0) {
        bad("time.t_end".into(), format!("must be finite and nonnegative (got {})", t.t_end));
    }
    match (t.cfl, t.dt) {
        (Some(_), Some(_)) => bad("time.dt".into(), "give either cfl or dt, not both".into()),
        (Some(cfl), None) if !positive(cfl) => bad("time.cfl".into(), format!("must be positive (got {cfl})")),
        (None, Some(dt)) if !positive(dt) => bad("time.dt".into(), format!("must be positive (got {dt})")),
        _ => {}
    }

    let check_power = |p: u32| p >= 2;
    for (name, list) in [("theta2", &c.initial.theta2), ("theta_b", &c.initial.theta_b)] {
        for (i, b) in list.iter().enumerate() {
            let p = format!("initial.{name}[{i}]");
            if !(b.amplitude.is_finite() && b.amplitude.abs() < std::f64::consts::FRAC_PI_2) {
                bad(format!("{p}.amplitude"), format!("need |amplitude| < pi/2 (got {})", b.amplitude));
            }
            if !b.center.is_finite() {
                bad(format!("{p}.center"), "must be finite".into());
            }
            if !positive(b.width) {
                bad(format!("{p}.width"), format!("must be positive (got {})", b.width));
            }
            if !check_power(b.power) {
                bad(format!("{p}.power"), format!("need power >= 2 for a C1 profile (got {})", b.power));
            }
        }
    }
    if let Background::Bumps(list) = &c.initial.background {
        for (i, b) in list.iter().enumerate() {
            let p = format!("initial.background[{i}]");
            if !(b.amplitude.is_finite() && b.amplitude >= 0.0) {
                bad(format!("{p}.amplitude"), format!("must be nonnegative (got {})", b.amplitude));
            }
            if !b.center.is_finite() {
                bad(format!("{p}.center"), "must be finite".into());
            }
            if !positive(b.width) {
                bad(format!("{p}.width"), format!("must be positive (got {})", b.width));
            }
            if !check_power(b.power) {
                bad(format!("{p}.power"), format!("need power >= 2 for a C1 profile (got {})", b.power));
            }
        }
        if !c.initial.f.is_empty() && list.iter().all(|b| b.amplitude == 0.0) {
            bad("initial.background".into(), "cannot neutralize particles with an all-zero background".into());
        }
    }
    for (i, b) in c.initial.f.iter().enumerate() {
        let p = format!("initial.f[{i}]");
        if !(b.amplitude.is_finite() && b.amplitude >= 0.0) {
            bad(format!("{p}.amplitude"), format!("must be nonnegative (got {})", b.amplitude));
        }
        for (k, v) in [("x_center", b.x_center), ("v1_center", b.v1_center), ("v2_center", b.v2_center)] {
            if !v.is_finite() {
                bad(format!("{p}.{k}"), "must be finite".into());
            }
        }
        for (k, v) in [("x_width", b.x_width), ("v_width", b.v_width)] {
            if !positive(v) {
                bad(format!("{p}.{k}"), format!("must be positive (got {v})"));
            }
        }
        if !check_power(b.power) {
            bad(format!("{p}.power"), format!("need power >= 2 for a C1 profile (got {})", b.power));
        }
    }

    let pc = &c.solver.picard;
    if let Some(tf) = pc.t_final {
        if !positive(tf) {
            bad("solver.picard.t_final".into(), format!("must be positive (got {tf})"));
        }
    }
    if !positive(pc.tol) {
        bad("solver.picard.tol".into(), format!("must be positive (got {})", pc.tol));
    }
    if pc.max_iter == 0 {
        bad("solver.picard.max_iter".into(), "must be at least 1".into());
    }

    let tl = &c.tolerances;
    for (k, v) in [
        ("eps_guard", tl.eps_guard),
        ("separation_floor", tl.separation_floor),
        ("support_threshold", tl.support_threshold),
        ("boundary_tol", tl.boundary_tol),
        ("neutrality", tl.neutrality),
        ("interp_overshoot", tl.interp_overshoot),
        ("bound_tol", tl.bound_tol),
        ("envelope_tol", tl.envelope_tol),
    ] {
        if !positive(v) {
            bad(format!("tolerances.{k}"), format!("must be positive (got {v})"));
        }
    }
    if tl.eps_guard >= std::f64::consts::FRAC_PI_2 {
        bad("tolerances.eps_guard".into(), "must be below pi/2".into());
    }

    let h = &c.horizon;
    for (k, v) in [("dt", h.dt), ("t_max", h.t_max)] {
        if !positive(v) {
            bad(format!("horizon.{k}"), format!("must be positive (got {v})"));
        }
    }
    if !(h.safety.is_finite() && h.safety >= 0.0) {
        bad("horizon.safety".into(), format!("must be nonnegative (got {})", h.safety));
    }

    if c.output.every == 0 {
        bad("output.every".into(), "must be at least 1".into());
    }
    for (i, s) in c.output.snapshots.iter().enumerate() {
        if !(s.is_finite() && *s >= 0.0) {
            bad(format!("output.snapshots[{i}]"), format!("must be a nonnegative time (got {s})"));
        }
    }
    out
}

/// Gridded initial data built from a configuration.
#[derive(Clone, Debug)]
pub struct InitialData {
    pub f: DistributionGrid,
    pub inv: InvariantGrid,
    pub n: Vec<f64>,
    pub norms: ProfileNorms,
}

/// Sub-cells per x-cell when sampling the field profiles for their sup.
const PROFILE_REFINE: usize = 16;

impl InitialData {
    pub fn build(c: &SimConfig) -> Result<Self> {
        let grid = c.grid.build()?;
        let xa = grid.x_axis();
        let bumps = &c.initial.f;
        let f = DistributionGrid::from_fn(grid, |x, v1, v2| bumps.iter().map(|b| b.eval(x, v1, v2)).sum());
        let sum_at = |list: &[Bump], x: f64| list.iter().map(|b| b.eval(x)).sum::<f64>();
        let nodes = xa.nodes();
        let t2: Vec<f64> = nodes.iter().map(|&x| sum_at(&c.initial.theta2, x)).collect();
        let tb: Vec<f64> = nodes.iter().map(|&x| sum_at(&c.initial.theta_b, x)).collect();
        let inv = InvariantGrid::from_angles(xa, &t2, &tb);

        let density = compute_moments(&f, &vec![0.0; grid.nx]).rho;
        let n = match &c.initial.background {
            Background::Auto => density,
            Background::None => vec![0.0; grid.nx],
            Background::Bumps(list) => {
                let w = grid.x_weights();
                let shape: Vec<f64> = nodes.iter().map(|&x| sum_at(list, x)).collect();
                let target: f64 = density.iter().zip(&w).map(|(a, b)| a * b).sum();
                let have: f64 = shape.iter().zip(&w).map(|(a, b)| a * b).sum();
                if target == 0.0 {
                    vec![0.0; grid.nx]
                } else if have > 0.0 {
                    shape.iter().map(|s| s * target / have).collect()
                } else {
                    return Err(SimError::Config(vec![ConfigViolation {
                        path: "initial.background".into(),
                        message: "background bumps have no mass on the grid".into(),
                    }]));
                }
            }
        };
        let fine: Vec<f64> = (0..(nodes.len() - 1) * PROFILE_REFINE + 1)
            .map(|m| xa.origin + m as f64 * xa.step / PROFILE_REFINE as f64)
            .chain(c.initial.theta2.iter().chain(&c.initial.theta_b).map(|b| b.center))
            .filter(|x| (xa.origin..=nodes[nodes.len() - 1]).contains(x))
            .collect();
        let (mut s2, mut sb, mut ss) = (0.0f64, 0.0f64, 0.0f64);
        for &x in &fine {
            let (a, b) = (sum_at(&c.initial.theta2, x).abs(), sum_at(&c.initial.theta_b, x).abs());
            s2 = s2.max(a);
            sb = sb.max(b);
            ss = ss.max(a + b);
        }
        // a radial bump product peaks at its centre
        let f_peak = bumps
            .iter()
            .map(|p| bumps.iter().map(|b| b.eval(p.x_center, p.v1_center, p.v2_center)).sum::<f64>().abs())
            .fold(0.0, f64::max);
        let norms = ProfileNorms { theta2_sup: s2, theta_b_sup: sb, angle_sum_sup: ss, f_sup: f_peak };
        Ok(Self { f, inv, n, norms })
    }

    pub fn assumptions(&self) -> AssumptionReport {
        check_assumptions_with(&self.f, &self.inv, &self.n, Some(self.norms))
    }

    pub fn state(self, neutrality: f64) -> Result<SimState> {
        SimState::new(self.f, self.inv, self.n, neutrality)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn violations(text: &str) -> Vec<ConfigViolation> {
        match parse_config(text) {
            Err(SimError::Config(v)) => v,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn profile_norms_see_peaks_between_nodes() {
        // nx 64 on [-2, 2] and nv 8: zero is midway between nodes
        let c = parse_config(
            r#"{"grid": {"x_min": -2, "x_max": 2, "nx": 64, "v_max": 1, "nv1": 8, "nv2": 8},
                "initial": {"theta2": [{"amplitude": 0.2, "center": 0.0, "width": 0.5, "power": 2}],
                            "f": [{"amplitude": 0.5, "x_center": 0.0, "x_width": 0.5, "v1_center": 0.0, "v2_center": 0.0, "v_width": 0.5, "power": 2}]}}"#,
        )
        .unwrap();
        let d = InitialData::build(&c).unwrap();
        let nodal = d.inv.theta2().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(nodal < 0.2 - 1e-5);
        assert!(d.f.sup() < 0.5 - 1e-5);
        let a = d.assumptions();
        assert_eq!(a.summary.theta2_sup, 0.2);
        assert_eq!(a.summary.f_sup, 0.5);
    }

    #[test]
    fn empty_document_is_a_valid_vacuum() {
        let c = parse_config("{}").unwrap();
        assert_eq!(c.grid.nx, 128);
        assert_eq!(c.time.cfl, Some(0.5));
        assert!(c.initial.f.is_empty() && c.initial.theta2.is_empty());
        assert_eq!(c.solver.mode, Mode::Direct);
        assert_eq!(c.tolerances.eps_guard, 1e-3);
    }

    #[test]
    fn coarse_velocity_grid_names_the_field() {
        let v = violations(r#"{"grid": {"nv1": 2}}"#);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].path, "grid.nv1");
        assert!(v[0].message.contains("too coarse"));
    }

    #[test]
    fn every_violation_is_reported() {
        let v = violations(
            r#"{"grid": {"nv1": 2, "nx": -1, "bogus": 1},
                "time": {"t_end": "soon"},
                "tolerances": {"eps_guard": 0},
                "initial": {"theta2": [{"amplitude": 2.0, "width": 0}]}}"#,
        );
        let paths: Vec<&str> = v.iter().map(|e| e.path.as_str()).collect();
        for p in [
            "grid.nv1",
            "grid.nx",
            "grid.bogus",
            "time.t_end",
            "tolerances.eps_guard",
            "initial.theta2[0].amplitude",
            "initial.theta2[0].width",
        ] {
            assert!(paths.contains(&p), "{p} missing from {paths:?}");
        }
    }

    #[test]
    fn malformed_json_is_a_config_error() {
        assert!(matches!(parse_config("{"), Err(SimError::Config(_))));
        assert!(matches!(parse_config("[1]"), Err(SimError::Config(_))));
    }

    #[test]
    fn unknown_preset_is_reported() {
        let v = violations(r#"{"preset": "warp_drive"}"#);
        assert_eq!(v[0].path, "preset");
    }

    #[test]
    fn echo_round_trips_byte_for_byte() {
        for name in PRESETS {
            let c = parse_config(&format!(r#"{{"preset": "{name}"}}"#)).unwrap();
            let text = c.to_json();
            let again = parse_config(&text).unwrap();
            assert_eq!(again, c, "{name}");
            assert_eq!(again.to_json(), text, "{name}");
        }
        let c = parse_config(r#"{"time": {"dt": 0.01, "t_end": 0.3}, "output": {"dir": "o", "snapshots": [0.1]}}"#).unwrap();
        assert_eq!(parse_config(&c.to_json()).unwrap().to_json(), c.to_json());
    }

    #[test]
    fn simple_wave_preset_matches_the_hand_written_scenario() {
        let hand = r#"{
            "grid": {"x_min": -3, "x_max": 3, "nx": 256, "v_max": 1, "nv1": 8, "nv2": 8},
            "time": {"t_end": 1, "cfl": 0.5},
            "initial": {
                "theta2": [{"amplitude": 0.15, "center": 0, "width": 1, "power": 3}],
                "theta_b": [{"amplitude": 0.15, "center": 0, "width": 1, "power": 3}],
                "background": "none"
            }
        }"#;
        let mut preset = parse_config(r#"{"preset": "simple_wave"}"#).unwrap();
        preset.preset = None;
        assert_eq!(preset, parse_config(hand).unwrap());

        // α ≡ 0 and β is the 0.3-amplitude bump
        let d = InitialData::build(&preset).unwrap();
        let xa = d.inv.axis;
        for (i, x) in xa.nodes().into_iter().enumerate() {
            assert_eq!(d.inv.alpha[i], 0.0);
            let exact = 0.3 * bump_profile(x, 3);
            assert!((d.inv.beta[i] - exact).abs() < 1e-15);
        }
    }

    #[test]
    fn explicit_keys_override_the_preset() {
        let c = parse_config(r#"{"preset": "small_coupled", "grid": {"nx": 64}, "time": {"t_end": 0.1}}"#).unwrap();
        assert_eq!(c.grid.nx, 64);
        assert_eq!(c.grid.nv1, 48);
        assert_eq!(c.time.t_end, 0.1);
        assert_eq!(c.time.cfl, Some(0.5));
    }

    #[test]
    fn cfl_and_dt_are_exclusive() {
        let v = violations(r#"{"time": {"cfl": 0.5, "dt": 0.01}}"#);
        assert_eq!(v[0].path, "time.dt");
    }

    #[test]
    fn background_bumps_neutralize_exactly() {
        let c = parse_config(r#"{"preset": "small_coupled"}"#).unwrap();
        let d = InitialData::build(&c).unwrap();
        let s = d.state(1e-12).unwrap();
        assert!(s.moments.d1.last().unwrap().abs() < 1e-12);
        assert!(s.moments.d1.iter().any(|v| v.abs() > 1e-3));
    }

    #[test]
    fn auto_background_cancels_the_density() {
        let c = parse_config(r#"{"preset": "a3_violation"}"#).unwrap();
        let s = InitialData::build(&c).unwrap().state(1e-12).unwrap();
        assert!(s.moments.rho.iter().all(|r| r.abs() < 1e-15));
    }

    #[test]
    fn particles_without_background_are_not_neutral() {
        let c = parse_config(
            r#"{"initial": {"f": [{"amplitude": 1, "x_width": 1, "v_width": 1}], "background": "none"}}"#,
        )
        .unwrap();
        let e = InitialData::build(&c).unwrap().state(1e-10).unwrap_err();
        assert!(matches!(e, SimError::Config(ref v) if v[0].path == "initial.background"));
    }
}
