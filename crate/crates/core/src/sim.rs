//! Fixed-step RK4 simulation of the decentralized integral loop under a
//! schedule of loop connections and disconnections.

use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::blockmat::OrderedIndexSet;
use crate::error::{Error, Result};
use crate::intctl::{self, GainDesign, GainJson, LoopConfiguration, LtiPlant, PlantJson};
use crate::lyap;

/// States whose max-norm exceeds this are treated as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Connect,
    Disconnect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub action: Action,
    /// One-based loop index.
    #[serde(rename = "loop")]
    pub loop_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSchedule {
    pub events: Vec<Event>,
    pub t_final: f64,
    pub dt: f64,
    pub x0: DVector<f64>,
    /// Full length `p`.
    pub eta0: DVector<f64>,
    pub w: DVector<f64>,
    /// Full length `m`; only the entries of open loops are used.
    pub u_open_default: DVector<f64>,
    /// Hold `u_open_default` instead of the last applied input after a disconnect.
    pub reset_u_on_disconnect: bool,
    /// Zero `η_i` when loop `i` is reconnected.
    pub reset_eta_on_reconnect: bool,
}

impl SimulationSchedule {
    /// Zero initial conditions, zero disturbance and held inputs, no events.
    pub fn zeros(plant: &LtiPlant, t_final: f64, dt: f64) -> Self {
        SimulationSchedule {
            events: Vec::new(),
            t_final,
            dt,
            x0: DVector::zeros(plant.n_states()),
            eta0: DVector::zeros(plant.n_outputs()),
            w: DVector::zeros(plant.n_disturbances()),
            u_open_default: DVector::zeros(plant.n_inputs()),
            reset_u_on_disconnect: false,
            reset_eta_on_reconnect: false,
        }
    }

    /// Number of grid points, `floor(t_final/dt) + 1`.
    pub fn n_rows(&self) -> usize {
        grid_index(self.t_final, self.dt, f64::floor) + 1
    }

    /// Checks shapes, timing, toggle consistency and that every reachable
    /// configuration admits an equilibrium. Returns the reachable sets.
    pub fn validate(&self, plant: &LtiPlant, design: &GainDesign) -> Result<Vec<OrderedIndexSet>> {
        design.validate(plant)?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "t_final must be nonnegative, got {}",
                self.t_final
            )));
        }
        let lengths = [
            ("x0", self.x0.len(), plant.n_states()),
            ("eta0", self.eta0.len(), plant.n_outputs()),
            ("w", self.w.len(), plant.n_disturbances()),
            (
                "u_open_default",
                self.u_open_default.len(),
                plant.n_inputs(),
            ),
        ];
        for (name, got, expected) in lengths {
            if got != expected {
                return Err(Error::InvalidSchedule(format!(
                    "{name} has length {got}, expected {expected}"
                )));
            }
        }
        let finite = |v: &DVector<f64>| v.iter().all(|x| x.is_finite());
        if !(finite(&self.x0)
            && finite(&self.eta0)
            && finite(&self.w)
            && finite(&self.u_open_default))
        {
            return Err(Error::NonFinite);
        }
        let n = plant.n_loops();
        let mut closed = vec![false; n];
        let mut reached = vec![OrderedIndexSet::empty()];
        let mut last = 0.0;
        for ev in &self.events {
            if !(ev.time.is_finite() && ev.time >= 0.0 && ev.time <= self.t_final) {
                return Err(Error::InvalidSchedule(format!(
                    "event time {} outside [0, {}]",
                    ev.time, self.t_final
                )));
            }
            if ev.time < last {
                return Err(Error::InvalidSchedule(
                    "events must be sorted by time".into(),
                ));
            }
            last = ev.time;
            if ev.loop_index == 0 || ev.loop_index > n {
                return Err(Error::InvalidSchedule(format!(
                    "loop {} does not exist (N = {n})",
                    ev.loop_index
                )));
            }
            let i = ev.loop_index - 1;
            match (ev.action, closed[i]) {
                (Action::Connect, true) => {
                    return Err(Error::InvalidSchedule(format!(
                        "loop {} connected twice at t = {}",
                        ev.loop_index, ev.time
                    )))
                }
                (Action::Disconnect, false) => {
                    return Err(Error::InvalidSchedule(format!(
                        "loop {} is not connected at t = {}",
                        ev.loop_index, ev.time
                    )))
                }
                _ => closed[i] = ev.action == Action::Connect,
            }
            let s = mask_to_set(&closed);
            if !reached.contains(&s) {
                reached.push(s);
            }
        }
        for s in &reached {
            intctl::check_configuration(plant, design, s)?;
        }
        Ok(reached)
    }
}

fn grid_index(t: f64, dt: f64, round: fn(f64) -> f64) -> usize {
    // the relative nudge keeps 300/1e-3 from landing just below an integer
    round(t / dt * (1.0 + 1e-12)) as usize
}

fn mask_to_set(closed: &[bool]) -> OrderedIndexSet {
    let idx: Vec<usize> = closed
        .iter()
        .enumerate()
        .filter(|(_, c)| **c)
        .map(|(i, _)| i)
        .collect();
    OrderedIndexSet::new(idx, closed.len()).expect("indices in range")
}

fn set_mask(closed: &[bool]) -> u64 {
    closed
        .iter()
        .enumerate()
        .filter(|(_, c)| **c)
        .map(|(i, _)| 1u64 << i)
        .sum()
}

/// Suggested step `0.1 / max |λ(A)|`.
pub fn suggested_dt(plant: &LtiPlant) -> Result<f64> {
    let lmax = lyap::eigenvalues(plant.a())?
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    Ok(if lmax > 0.0 { 0.1 / lmax } else { 1e-3 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentInfo {
    pub start_index: usize,
    pub t_start: f64,
    /// One-based closed loops.
    pub sigma: Vec<usize>,
    /// Equilibrium of this configuration with the inputs held at segment start.
    pub equilibrium_x: Vec<f64>,
    pub equilibrium_eta: Vec<f64>,
    /// Spectral abscissa of the segment's state matrix over `(x, η_σ)`.
    pub abscissa: f64,
}

/// Time series on the simulation grid. Row `k` is taken after the events
/// scheduled at grid point `k` have been applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub eta: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub sigma_mask: Vec<u64>,
    pub segments: Vec<SegmentInfo>,
    pub diverged: bool,
    pub divergence_time: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the last grid point not after `t`.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let dt = if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            return (!self.is_empty()).then_some(0);
        };
        let k = grid_index(t, dt, f64::floor);
        (k < self.len()).then_some(k)
    }

    pub fn summary(&self) -> TrajectorySummary {
        let last = self.len().saturating_sub(1);
        let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        TrajectorySummary {
            rows: self.len(),
            t_end: self.times.get(last).copied().unwrap_or(0.0),
            diverged: self.diverged,
            divergence_time: self.divergence_time,
            terminal_error_inf: self.e.get(last).map(|e| inf(e)).unwrap_or(0.0),
            terminal_state: self.x.get(last).cloned().unwrap_or_default(),
            terminal_eta: self.eta.get(last).cloned().unwrap_or_default(),
            segments: self.segments.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub rows: usize,
    pub t_end: f64,
    pub diverged: bool,
    pub divergence_time: Option<f64>,
    pub terminal_error_inf: f64,
    pub terminal_state: Vec<f64>,
    pub terminal_eta: Vec<f64>,
    pub segments: Vec<SegmentInfo>,
}

struct Segment {
    m: DMatrix<f64>,
    c: DVector<f64>,
    eta_idx: Vec<usize>,
    u_idx: Vec<usize>,
    k: DMatrix<f64>,
}

struct Rk4 {
    k1: DVector<f64>,
    k2: DVector<f64>,
    k3: DVector<f64>,
    k4: DVector<f64>,
    tmp: DVector<f64>,
}

impl Rk4 {
    fn new(dim: usize) -> Self {
        let z = || DVector::zeros(dim);
        Rk4 {
            k1: z(),
            k2: z(),
            k3: z(),
            k4: z(),
            tmp: z(),
        }
    }

    fn eval(m: &DMatrix<f64>, c: &DVector<f64>, z: &DVector<f64>, out: &mut DVector<f64>) {
        out.copy_from(c);
        out.gemv(1.0, m, z, 1.0);
    }

    /// One classical RK4 step of `ż = M z + c`.
    fn step(&mut self, m: &DMatrix<f64>, c: &DVector<f64>, z: &mut DVector<f64>, h: f64) {
        Self::eval(m, c, z, &mut self.k1);
        self.tmp.copy_from(z);
        self.tmp.axpy(0.5 * h, &self.k1, 1.0);
        Self::eval(m, c, &self.tmp, &mut self.k2);
        self.tmp.copy_from(z);
        self.tmp.axpy(0.5 * h, &self.k2, 1.0);
        Self::eval(m, c, &self.tmp, &mut self.k3);
        self.tmp.copy_from(z);
        self.tmp.axpy(h, &self.k3, 1.0);
        Self::eval(m, c, &self.tmp, &mut self.k4);
        z.axpy(h / 6.0, &self.k1, 1.0);
        z.axpy(h / 3.0, &self.k2, 1.0);
        z.axpy(h / 3.0, &self.k3, 1.0);
        z.axpy(h / 6.0, &self.k4, 1.0);
    }
}

struct LoopState {
    x: DVector<f64>,
    eta: DVector<f64>,
    u: DVector<f64>,
    closed: Vec<bool>,
}

fn build_segment(
    plant: &LtiPlant,
    design: &GainDesign,
    sched: &SimulationSchedule,
    st: &LoopState,
) -> Result<(Segment, intctl::Equilibrium, OrderedIndexSet)> {
    let s = mask_to_set(&st.closed);
    let open = s.complement(plant.n_loops());
    let u_open = DVector::from_iterator(
        plant.input_indices(&open).len(),
        plant.input_indices(&open).into_iter().map(|j| st.u[j]),
    );
    let cfg = LoopConfiguration::new(plant, s.clone(), Some(u_open.clone()), sched.w.clone())?;
    let cl = intctl::closed_loop(plant, design, &cfg)?;
    let mut forcing = DVector::zeros(u_open.len() + sched.w.len());
    forcing.rows_mut(0, u_open.len()).copy_from(&u_open);
    forcing
        .rows_mut(u_open.len(), sched.w.len())
        .copy_from(&sched.w);
    let c = &cl.b_direct * forcing;
    let seg = Segment {
        m: cl.a_direct,
        c,
        eta_idx: plant.output_indices(&s),
        u_idx: plant.input_indices(&s),
        k: design.k_sub(&s),
    };
    Ok((seg, cl.equilibrium, s))
}

fn apply_event(
    plant: &LtiPlant,
    design: &GainDesign,
    sched: &SimulationSchedule,
    st: &mut LoopState,
    ev: &Event,
) {
    let i = ev.loop_index - 1;
    let u_range = plant.input_partition().range(i);
    let eta_range = plant.output_partition().range(i);
    match ev.action {
        Action::Connect => {
            if sched.reset_eta_on_reconnect {
                st.eta.rows_mut(eta_range.start, eta_range.len()).fill(0.0);
            }
            st.closed[i] = true;
        }
        Action::Disconnect => {
            let held = if sched.reset_u_on_disconnect {
                sched
                    .u_open_default
                    .rows(u_range.start, u_range.len())
                    .into_owned()
            } else {
                &design.k_blocks()[i] * st.eta.rows(eta_range.start, eta_range.len())
            };
            st.u.rows_mut(u_range.start, u_range.len()).copy_from(&held);
            st.closed[i] = false;
        }
    }
}

/// Integrates the closed loop on the grid `k·dt`, `k = 0..=floor(t_final/dt)`.
/// Event times are snapped to the nearest grid point. On divergence the
/// trajectory is truncated after the first offending point.
pub fn simulate(
    plant: &LtiPlant,
    design: &GainDesign,
    sched: &SimulationSchedule,
) -> Result<Trajectory> {
    sched.validate(plant, design)?;
    let n_rows = sched.n_rows();
    let mut events: Vec<(usize, &Event)> = sched
        .events
        .iter()
        .map(|e| (grid_index(e.time, sched.dt, f64::round).min(n_rows - 1), e))
        .collect();
    events.sort_by_key(|(k, _)| *k);

    let mut st = LoopState {
        x: sched.x0.clone(),
        eta: sched.eta0.clone(),
        u: sched.u_open_default.clone(),
        closed: vec![false; plant.n_loops()],
    };
    let n = plant.n_states();
    let mut traj = Trajectory {
        times: Vec::with_capacity(n_rows),
        x: Vec::with_capacity(n_rows),
        eta: Vec::with_capacity(n_rows),
        e: Vec::with_capacity(n_rows),
        u: Vec::with_capacity(n_rows),
        sigma_mask: Vec::with_capacity(n_rows),
        segments: Vec::new(),
        diverged: false,
        divergence_time: None,
    };
    let mut next_event = 0;
    let mut seg: Option<Segment> = None;
    let mut z = DVector::zeros(0);
    let mut rk = Rk4::new(0);

    for k in 0..n_rows {
        let t = k as f64 * sched.dt;
        let mut changed = seg.is_none();
        while next_event < events.len() && events[next_event].0 == k {
            apply_event(plant, design, sched, &mut st, events[next_event].1);
            next_event += 1;
            changed = true;
        }
        if changed {
            let (s, eq, sigma) = build_segment(plant, design, sched, &st)?;
            traj.segments.push(SegmentInfo {
                start_index: k,
                t_start: t,
                sigma: sigma.to_one_based(),
                equilibrium_x: eq.x.iter().copied().collect(),
                equilibrium_eta: eq.eta_sigma.iter().copied().collect(),
                abscissa: lyap::spectral_abscissa(&s.m)?.abscissa,
            });
            z = DVector::zeros(n + s.eta_idx.len());
            z.rows_mut(0, n).copy_from(&st.x);
            for (r, &j) in s.eta_idx.iter().enumerate() {
                z[n + r] = st.eta[j];
            }
            rk = Rk4::new(z.len());
            seg = Some(s);
        }
        let s = seg.as_ref().expect("segment built");

        // applied input for the closed loops
        let u_closed = &s.k * z.rows(n, s.eta_idx.len());
        for (r, &j) in s.u_idx.iter().enumerate() {
            st.u[j] = u_closed[r];
        }
        let e = plant.c() * &st.x + plant.du() * &st.u + plant.dw() * &sched.w;
        traj.times.push(t);
        traj.x.push(st.x.iter().copied().collect());
        traj.eta.push(st.eta.iter().copied().collect());
        traj.e.push(e.iter().copied().collect());
        traj.u.push(st.u.iter().copied().collect());
        traj.sigma_mask.push(set_mask(&st.closed));

        let bad = z
            .iter()
            .chain(e.iter())
            .any(|v| !v.is_finite() || v.abs() > DIVERGENCE_THRESHOLD);
        if bad {
            traj.diverged = true;
            traj.divergence_time = Some(t);
            break;
        }
        if k + 1 == n_rows {
            break;
        }
        rk.step(&s.m, &s.c, &mut z, sched.dt);
        st.x.copy_from(&z.rows(0, n));
        for (r, &j) in s.eta_idx.iter().enumerate() {
            st.eta[j] = z[n + r];
        }
    }
    Ok(traj)
}

/// `%.12g`-style formatting.
pub fn format_g12(v: f64) -> String {
    format_significant(v, 12)
}

/// C `%g`-style formatting with `digits` significant digits.
pub fn format_significant(v: f64, digits: usize) -> String {
    let p = digits.max(1) as i32;
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.*e}", (p - 1) as usize, v);
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-4..p).contains(&exp) {
        trim(format!("{:.*}", (p - 1 - exp) as usize, v))
    } else {
        format!("{}e{}", trim(mant.to_string()), exp)
    }
}

/// CSV header for a plant with `n` states, `p` outputs and `m` inputs.
pub fn csv_header(n: usize, p: usize, m: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("x{i}")));
    cols.extend((1..=p).map(|i| format!("eta{i}")));
    cols.extend((1..=p).map(|i| format!("e{i}")));
    cols.extend((1..=m).map(|i| format!("u{i}")));
    cols.push("sigma_mask".into());
    cols.join(",")
}

pub fn write_csv<W: Write>(traj: &Trajectory, mut out: W) -> Result<()> {
    if traj.is_empty() {
        return Err(Error::InvalidInput("empty trajectory".into()));
    }
    writeln!(
        out,
        "{}",
        csv_header(traj.x[0].len(), traj.eta[0].len(), traj.u[0].len())
    )?;
    let mut line = String::new();
    for k in 0..traj.len() {
        line.clear();
        line.push_str(&format_g12(traj.times[k]));
        for v in traj.x[k]
            .iter()
            .chain(&traj.eta[k])
            .chain(&traj.e[k])
            .chain(&traj.u[k])
        {
            line.push(',');
            line.push_str(&format_g12(*v));
        }
        line.push(',');
        line.push_str(&traj.sigma_mask[k].to_string());
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Writes the CSV through a temporary file in the target directory and
/// renames it into place.
pub fn export_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        write_csv(traj, &mut buf)?;
        buf.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

/// Either a path (relative to the config file) or the object inline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    Path(String),
    Inline(T),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub plant: Source<PlantJson>,
    pub gains: Source<GainJson>,
    #[serde(default)]
    pub events: Vec<Event>,
    pub t_final: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub eta0: Option<Vec<f64>>,
    #[serde(default)]
    pub w: Option<Vec<f64>>,
    #[serde(default)]
    pub u_open_default: Option<Vec<f64>>,
    #[serde(default)]
    pub reset_u_on_disconnect: bool,
    #[serde(default)]
    pub reset_eta_on_reconnect: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ResolvedSimulation {
    pub plant: LtiPlant,
    pub design: GainDesign,
    pub schedule: SimulationSchedule,
    /// Files the config referenced, in the order plant, gains.
    pub referenced_files: Vec<PathBuf>,
}

fn load_source<T: serde::de::DeserializeOwned>(
    src: &Source<T>,
    base: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<T>
where
    T: Clone,
{
    match src {
        Source::Inline(v) => Ok(v.clone()),
        Source::Path(p) => {
            let path = base.join(p);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            files.push(path.clone());
            serde_json::from_str(&text)
                .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
        }
    }
}

fn vec_or_zeros(v: &Option<Vec<f64>>, n: usize) -> DVector<f64> {
    v.as_ref()
        .map(|v| DVector::from_vec(v.clone()))
        .unwrap_or_else(|| DVector::zeros(n))
}

impl SimulationConfig {
    pub fn from_file(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let cfg: SimulationConfig = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    /// Loads referenced files relative to `base` and builds a validated schedule.
    pub fn resolve(&self, base: &Path) -> Result<ResolvedSimulation> {
        let mut files = Vec::new();
        let plant = LtiPlant::try_from(load_source(&self.plant, base, &mut files)?)?;
        let design = GainDesign::try_from(load_source(&self.gains, base, &mut files)?)?;
        let dt = match self.dt {
            Some(dt) => dt,
            None => suggested_dt(&plant)?,
        };
        let schedule = SimulationSchedule {
            events: self.events.clone(),
            t_final: self.t_final,
            dt,
            x0: vec_or_zeros(&self.x0, plant.n_states()),
            eta0: vec_or_zeros(&self.eta0, plant.n_outputs()),
            w: vec_or_zeros(&self.w, plant.n_disturbances()),
            u_open_default: vec_or_zeros(&self.u_open_default, plant.n_inputs()),
            reset_u_on_disconnect: self.reset_u_on_disconnect,
            reset_eta_on_reconnect: self.reset_eta_on_reconnect,
        };
        schedule.validate(&plant, &design)?;
        Ok(ResolvedSimulation {
            plant,
            design,
            schedule,
            referenced_files: files,
        })
    }
}
