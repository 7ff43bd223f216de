use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use rimnull_core::closedloop::anneal::{anneal_with_table, AnnealInit, AnnealSettings};
use rimnull_core::closedloop::library::{
    build_library, track_library_with_table, LibraryOptimizer, LibraryTracking,
};
use rimnull_core::closedloop::moving::{trajectory_table, GRID_STEP_DEG};
use rimnull_core::closedloop::theorem::{mc_error_probability, theorem1_with, GammaForm};
use rimnull_core::closedloop::{cluster_partition, AngleTable, ClosedLoopTrace, Measurement, SignalScenario};
use rimnull_core::field::{element_field_vector, gain_normalization, total_pattern};
use rimnull_core::hybrid::{mismatch_report, run_hybrid_with, HybridScenario};
use rimnull_core::io::{
    bundle_table, fmt_f64, geometry_table, pattern_table, quantized_table, read_quantized, read_weights,
    trace_table, weights_table, Table,
};
use rimnull_core::openloop::{build_constraints, gp_solve, optimal_weights_multi, optimal_weights_single};
use rimnull_core::quantized::{firefly_search, serial_search, FireflySettings};
use rimnull_core::{DishConfig, Geometry, GpSettings, PhaseAlphabet, QuantizedWeights, WeightVector};
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::manifest::{digest, sha256_hex, versions, RunManifest};
use crate::settings::*;
use crate::Command;

/// Values given on the command line; they take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub method: Option<String>,
}

struct Out {
    dir: PathBuf,
    files: Vec<String>,
}

impl Out {
    fn new(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn table(&mut self, name: &str, t: &Table) -> CliResult<()> {
        let path = self.dir.join(name);
        if let Some(p) = path.parent() {
            std::fs::create_dir_all(p)?;
        }
        t.save(&path)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

struct Done {
    resolved: Value,
    seeds: Vec<u64>,
}

/// A file named in the config, read once so its hash and contents agree.
struct Input {
    given: String,
    path: PathBuf,
    text: String,
}

impl Input {
    fn read(base: &Path, given: &Path) -> CliResult<Self> {
        let path = if given.is_absolute() { given.to_path_buf() } else { base.join(given) };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        Ok(Self { given: given.display().to_string(), path, text })
    }

    fn describe(&self) -> Value {
        json!({ "file": self.given, "sha256": sha256_hex(self.text.as_bytes()) })
    }

    fn err(&self, e: impl std::fmt::Display) -> CliError {
        CliError::Input(format!("{}: {e}", self.path.display()))
    }

    fn quantized(&self) -> CliResult<QuantizedWeights> {
        read_quantized(&self.text).map_err(|e| self.err(e))
    }

    /// Accepts both the continuous and the quantized weights layout.
    fn weights(&self, n: usize) -> CliResult<WeightVector> {
        let header = self.text.lines().next().unwrap_or("");
        let w = if header.split('\t').any(|c| c == "levels") {
            self.quantized()?.to_weights()
        } else {
            read_weights(&self.text).map_err(|e| self.err(e))?
        };
        if w.len() != n {
            return Err(self.err(format!("{} weights for a dish with {n} rim elements", w.len())));
        }
        Ok(w)
    }
}

pub fn execute(cmd: Command, file: &FileConfig, base: &Path, ov: &Overrides, out_dir: &Path) -> CliResult<RunManifest> {
    let t0 = Instant::now();
    if ov.method.is_some() && !matches!(cmd, Command::Nullscan | Command::Library) {
        return Err(CliError::Config("--method applies to nullscan and library only".into()));
    }
    let dish = file.dish.clone().unwrap_or_default().resolve()?;
    let mut out = Out::new(out_dir)?;
    let done = match cmd {
        Command::Pattern => pattern(&dish, file.pattern.clone().unwrap_or_default(), base, &mut out)?,
        Command::Nullscan => nullscan(&dish, file.nullscan.clone().unwrap_or_default(), ov, &mut out)?,
        Command::Freqscan => freqscan(&dish, file.freqscan.as_ref(), base, &mut out)?,
        Command::Theorem1 => theorem1(file.theorem1.clone().unwrap_or_default(), ov, &mut out)?,
        Command::Closedloop => closedloop(&dish, file.closedloop.as_ref(), base, ov, &mut out)?,
        Command::Moving => moving(&dish, file.moving.as_ref(), ov, &mut out)?,
        Command::Library => library(&dish, file.library.as_ref(), ov, &mut out)?,
        Command::Hybrid => hybrid(&dish, file.hybrid.clone().unwrap_or_default(), ov, &mut out)?,
    };
    let name = cmd.name();
    let resolved = json!({ "command": name, "dish": dish, "settings": done.resolved });
    let manifest = RunManifest {
        scenario: name.to_string(),
        config_digest: digest(&resolved),
        seeds: done.seeds,
        versions: versions(),
        outputs: out.files,
        wall_clock_s: t0.elapsed().as_secs_f64(),
        resolved,
    };
    manifest.save(out_dir)?;
    Ok(manifest)
}

fn build(dish: &DishConfig) -> CliResult<Geometry> {
    Ok(Geometry::build(dish)?)
}

fn measurement(key: &str, name: Option<&String>, default: Measurement) -> CliResult<Measurement> {
    match name {
        None => Ok(default),
        Some(s) => Measurement::from_name(s).ok_or_else(|| {
            CliError::Config(format!(
                "{key}: unknown measurement '{s}'; expected sampled, chi-square, expected-power or true-gain"
            ))
        }),
    }
}

fn alphabet(levels: usize) -> CliResult<PhaseAlphabet> {
    PhaseAlphabet::new(levels).map_err(|e| CliError::Config(e.to_string()))
}

fn positive(key: &str, x: f64) -> CliResult<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::Config(format!("{key} must be positive")))
    }
}

fn at_least_one(key: &str, x: usize) -> CliResult<usize> {
    if x >= 1 {
        Ok(x)
    } else {
        Err(CliError::Config(format!("{key} must be at least 1")))
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    if s.is_empty() {
        f64::NAN
    } else {
        s[s.len() / 2]
    }
}

fn quantile(v: &[f64], q: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    if s.is_empty() {
        f64::NAN
    } else {
        s[((s.len() - 1) as f64 * q).round() as usize]
    }
}

// ---- pattern ----

fn pattern(dish: &DishConfig, s: PatternSection, base: &Path, out: &mut Out) -> CliResult<Done> {
    let start = s.start_deg.unwrap_or(0.0);
    let stop = s.stop_deg.unwrap_or(5.0);
    let step = s.step_deg.unwrap_or(0.01);
    let angles = grid("pattern", start, stop, step)?;
    let input = s.weights.as_ref().map(|p| Input::read(base, p)).transpose()?;
    let g = build(dish)?;
    let w = match &input {
        Some(i) => i.weights(g.len())?,
        None => WeightVector::ones(g.len()),
    };
    let rad: Vec<f64> = angles.iter().map(|a| a.to_radians()).collect();
    let cut = total_pattern(&g, &w, &rad)?;
    out.table("pattern.tsv", &pattern_table(&cut))?;
    let export_geometry = s.export_geometry.unwrap_or(false);
    if export_geometry {
        out.table("geometry.tsv", &geometry_table(&g))?;
    }
    if let Some(b) = s.bundle_deg {
        out.table("bundle.tsv", &bundle_table(&element_field_vector(&g, b.to_radians())))?;
    }
    Ok(Done {
        resolved: json!({
            "start_deg": start, "stop_deg": stop, "step_deg": step,
            "weights": input.as_ref().map(Input::describe),
            "export_geometry": export_geometry, "bundle_deg": s.bundle_deg,
        }),
        seeds: Vec::new(),
    })
}

// ---- nullscan ----

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Optimal,
    Gp,
    Firefly(usize),
    Serial(usize),
}

impl Method {
    pub fn parse(s: &str) -> CliResult<Self> {
        let bad = || {
            CliError::Config(format!(
                "unknown method '{s}'; expected optimal, gp, firefly-<levels> or serial-<levels>"
            ))
        };
        let levels = |t: &str| t.parse::<usize>().ok().filter(|&m| m >= 2).ok_or_else(bad);
        match s {
            "optimal" => Ok(Method::Optimal),
            "gp" => Ok(Method::Gp),
            _ => {
                if let Some(t) = s.strip_prefix("firefly-") {
                    Ok(Method::Firefly(levels(t)?))
                } else if let Some(t) = s.strip_prefix("serial-") {
                    Ok(Method::Serial(levels(t)?))
                } else {
                    Err(bad())
                }
            }
        }
    }
}

enum Solved {
    Continuous(WeightVector),
    Quantized(QuantizedWeights),
}

impl Solved {
    fn values(&self) -> WeightVector {
        match self {
            Solved::Continuous(w) => w.clone(),
            Solved::Quantized(q) => q.to_weights(),
        }
    }

    fn table(&self) -> Table {
        match self {
            Solved::Continuous(w) => weights_table(w),
            Solved::Quantized(q) => quantized_table(q),
        }
    }
}

fn nullscan(dish: &DishConfig, s: NullscanSection, ov: &Overrides, out: &mut Out) -> CliResult<Done> {
    let method_name = ov.method.clone().or(s.method.clone()).unwrap_or_else(|| "gp".into());
    let method = Method::parse(&method_name)?;
    let start = s.start_deg.unwrap_or(1.0);
    let stop = s.stop_deg.unwrap_or(3.0);
    let step = s.step_deg.unwrap_or(0.25);
    let angles = grid("nullscan", start, stop, step)?;
    let seed = ov.seed.or(s.seed).unwrap_or(0);
    let defaults = FireflySettings::default();
    let population = s.population.unwrap_or(defaults.population);
    let movements = s.movements.unwrap_or(defaults.movements);
    let write_weights = s.write_weights.unwrap_or(false);
    if let Some(fs) = &s.frequencies_hz {
        if fs.is_empty() {
            return Err(CliError::Config("nullscan.frequencies_hz must not be empty".into()));
        }
        for &f in fs {
            positive("nullscan.frequencies_hz", f)?;
        }
    }
    let levels = match method {
        Method::Firefly(m) | Method::Serial(m) => Some(alphabet(m)?),
        _ => None,
    };

    let g = build(dish)?;
    let norm = gain_normalization(&g);
    let boresight = element_field_vector(&g, 0.0);
    let rows: Vec<(f64, [f64; 3], Solved)> = angles
        .par_iter()
        .enumerate()
        .map(|(i, &deg)| -> CliResult<_> {
            let psi = deg.to_radians();
            let bundle = element_field_vector(&g, psi);
            let set = build_constraints(&g, &[psi], s.mainlobe_delta, s.frequencies_hz.as_deref())?;
            let point_seed = seed.wrapping_add(i as u64);
            let solved = match method {
                Method::Optimal if set.len() == 1 => Solved::Continuous(optimal_weights_single(&bundle)?.weights),
                Method::Optimal => Solved::Continuous(optimal_weights_multi(&set)?.weights),
                Method::Gp => Solved::Continuous(gp_solve(&set, &GpSettings::default())?.weights),
                Method::Firefly(_) => {
                    let st = FireflySettings { population, movements, seed: point_seed, ..Default::default() };
                    Solved::Quantized(firefly_search(&set, levels.as_ref().unwrap(), &st)?.weights)
                }
                Method::Serial(_) => Solved::Quantized(serial_search(&set, levels.as_ref().unwrap(), point_seed)?),
            };
            let w = solved.values();
            let null = norm.dbi(bundle.total_field(w.values())?);
            let main = norm.dbi(boresight.total_field(w.values())?);
            let quiet = norm.dbi(bundle.fixed_field + bundle.element_vector.iter().sum::<rimnull_core::Complex64>());
            Ok((deg, [null, main, quiet], solved))
        })
        .collect::<CliResult<_>>()?;

    let mut t = Table::new(&["psi_deg", "null_gain_dbi", "mainlobe_gain_dbi", "quiescent_dbi"]);
    for (deg, v, _) in &rows {
        t.push_f64(&[*deg, v[0], v[1], v[2]])?;
    }
    out.table("nullscan.tsv", &t)?;
    if write_weights {
        for (i, (_, _, w)) in rows.iter().enumerate() {
            out.table(&format!("weights/nullscan_{i:04}.tsv"), &w.table())?;
        }
    }
    let stochastic = matches!(method, Method::Firefly(_) | Method::Serial(_));
    Ok(Done {
        resolved: json!({
            "method": method_name, "start_deg": start, "stop_deg": stop, "step_deg": step,
            "mainlobe_delta": s.mainlobe_delta, "frequencies_hz": s.frequencies_hz,
            "population": population, "movements": movements,
            "write_weights": write_weights, "seed": seed,
        }),
        seeds: if stochastic { (0..angles.len() as u64).map(|i| seed.wrapping_add(i)).collect() } else { Vec::new() },
    })
}

// ---- freqscan ----

fn freqscan(dish: &DishConfig, s: Option<&FreqscanSection>, base: &Path, out: &mut Out) -> CliResult<Done> {
    let empty = FreqscanSection::default();
    let s = s.unwrap_or(&empty);
    let mut need = Need::new("freqscan");
    let weights = need.req("weights", &s.weights);
    let psi_deg = need.req("psi_deg", &s.psi_deg);
    let start = need.req("start_hz", &s.start_hz);
    let stop = need.req("stop_hz", &s.stop_hz);
    let step = need.req("step_hz", &s.step_hz);
    need.finish()?;
    let (weights, psi_deg, start, stop, step) =
        (weights.unwrap(), psi_deg.unwrap(), start.unwrap(), stop.unwrap(), step.unwrap());
    positive("freqscan.start_hz", start)?;
    let freqs = grid("freqscan", start, stop, step)?;
    let input = Input::read(base, &weights)?;
    let g = build(dish)?;
    let w = input.weights(g.len())?;
    let psi = psi_deg.to_radians();
    let gains: Vec<f64> = freqs
        .par_iter()
        .map(|&f| -> CliResult<f64> {
            let gf = g.at_frequency(f)?;
            let b = element_field_vector(&gf, psi);
            Ok(gain_normalization(&gf).dbi(b.total_field(w.values())?))
        })
        .collect::<CliResult<_>>()?;
    let mut t = Table::new(&["frequency_hz", "null_gain_dbi"]);
    for (f, gdb) in freqs.iter().zip(&gains) {
        t.push_f64(&[*f, *gdb])?;
    }
    out.table("freqscan.tsv", &t)?;
    Ok(Done {
        resolved: json!({
            "weights": input.describe(), "psi_deg": psi_deg,
            "start_hz": start, "stop_hz": stop, "step_hz": step,
        }),
        seeds: Vec::new(),
    })
}

// ---- theorem1 ----

fn theorem1(s: Theorem1Section, ov: &Overrides, out: &mut Out) -> CliResult<Done> {
    let gains = s.gain.unwrap_or_else(|| vec![1.0]);
    let fractions = s.delta_fraction.unwrap_or_else(|| vec![0.01, 0.1, 0.5]);
    let inrs = s.inr_db.unwrap_or_else(|| vec![-10.0, 0.0, 10.0]);
    let samples = s.samples.unwrap_or_else(|| vec![100, 1000]);
    let trials = s.trials.unwrap_or(1_000_000);
    let seed = ov.seed.or(s.seed).unwrap_or(0);
    for (k, v) in [("gain", &gains), ("delta_fraction", &fractions), ("inr_db", &inrs)] {
        if v.is_empty() {
            return Err(CliError::Config(format!("theorem1.{k} must not be empty")));
        }
    }
    if samples.is_empty() {
        return Err(CliError::Config("theorem1.samples must not be empty".into()));
    }
    let mut points = Vec::new();
    for &g in &gains {
        for &f in &fractions {
            for &inr in &inrs {
                for &n in &samples {
                    points.push((g, g * f, inr, n));
                }
            }
        }
    }
    let mut t = Table::new(&["G", "dG", "INR_dB", "N", "pe_analytic", "pe_mc", "stderr", "pe_printed"]);
    let mut seeds = Vec::with_capacity(points.len());
    for (i, &(g, dg, inr_db, n)) in points.iter().enumerate() {
        let inr = 10f64.powf(inr_db / 10.0);
        let point_seed = seed.wrapping_add(i as u64);
        let pe = theorem1_with(GammaForm::Derived, g, dg, inr, n).map_err(|e| CliError::Config(e.to_string()))?;
        let printed = theorem1_with(GammaForm::Printed, g, dg, inr, n)?;
        let mc = mc_error_probability(g, dg, inr, n, trials, point_seed).map_err(|e| CliError::Config(e.to_string()))?;
        t.push_f64(&[g, dg, inr_db, n as f64, pe, mc.probability, mc.stderr, printed])?;
        seeds.push(point_seed);
    }
    out.table("theorem1.tsv", &t)?;
    Ok(Done {
        resolved: json!({
            "gain": gains, "delta_fraction": fractions, "inr_db": inrs,
            "samples": samples, "trials": trials, "seed": seed,
        }),
        seeds,
    })
}

// ---- closed loop at a fixed angle ----

fn closedloop(
    dish: &DishConfig,
    s: Option<&ClosedloopSection>,
    base: &Path,
    ov: &Overrides,
    out: &mut Out,
) -> CliResult<Done> {
    let Some(s) = s else {
        return Err(CliError::Missing(vec!["closedloop".into()]));
    };
    let mut need = Need::new("closedloop");
    let psi_deg = need.req("psi_deg", &s.psi_deg);
    let inr_db = need.req("inr_db", &s.inr_db);
    let spd = need.req("samples_per_decision", &s.samples_per_decision);
    let decisions = need.req("decisions", &s.decisions);
    let levels = need.req("levels", &s.levels);
    need.finish()?;
    let (psi_deg, inr_db, spd, decisions, levels) =
        (psi_deg.unwrap(), inr_db.unwrap(), spd.unwrap(), decisions.unwrap(), levels.unwrap());
    let alph = alphabet(levels)?;
    let meas = measurement("closedloop.measurement", s.measurement.as_ref(), Measurement::ChiSquare)?;
    let runs = at_least_one("closedloop.runs", s.runs.unwrap_or(1))?;
    let cluster_size = at_least_one("closedloop.cluster_size", s.cluster_size.unwrap_or(1))?;
    let schedule_length = at_least_one("closedloop.schedule_length", s.schedule_length.unwrap_or(decisions))?;
    let record_every = at_least_one("closedloop.record_every", s.record_every.unwrap_or(1))?;
    let sample_rate = positive("closedloop.sample_rate_hz", s.sample_rate_hz.unwrap_or(1.0e6))?;
    at_least_one("closedloop.decisions", decisions)?;
    let seed = ov.seed.or(s.seed).unwrap_or(0);
    let input = s.init.as_ref().map(|p| Input::read(base, p)).transpose()?;

    let g = build(dish)?;
    let init = match &input {
        None => AnnealInit::Random,
        Some(i) => {
            let q = i.quantized()?;
            if q.alphabet().levels() != levels {
                return Err(i.err(format!("{}-level weights for a {levels}-level search", q.alphabet().levels())));
            }
            if q.len() != g.len() {
                return Err(i.err(format!("{} weights for a dish with {} rim elements", q.len(), g.len())));
            }
            AnnealInit::Provided(q)
        }
    };
    let psi = psi_deg.to_radians();
    let table = AngleTable::single(&g, psi);
    let part = cluster_partition(&g, cluster_size)?;
    let seeds: Vec<u64> = (0..runs as u64).map(|r| seed.wrapping_add(r)).collect();
    let results = seeds
        .par_iter()
        .map(|&sd| {
            let sc = SignalScenario {
                start_angle_rad: psi,
                angular_velocity_deg_s: 0.0,
                inr_db,
                samples_per_decision: spd,
                sample_rate_hz: sample_rate,
                seed: sd,
            };
            let mut st = AnnealSettings::new(alph.clone(), decisions, sd);
            st.measurement = meas;
            st.cluster_size = cluster_size;
            st.schedule_length = schedule_length;
            st.record_every = record_every;
            st.init = init.clone();
            anneal_with_table(&sc, &table, &part, &st)
        })
        .collect::<rimnull_core::Result<Vec<_>>>()?;

    let mut summary = Table::new(&["run", "seed", "final_gain_dbi", "accepted"]);
    for (r, (o, sd)) in results.iter().zip(&seeds).enumerate() {
        out.table(&format!("trace_{r}.tsv"), &trace_table(&o.trace))?;
        out.table(&format!("weights_{r}.tsv"), &quantized_table(&o.weights))?;
        let accepted = o.trace.records.last().map_or(0, |x| x.weights_id);
        summary.push(vec![r.to_string(), sd.to_string(), fmt_f64(o.final_gain_dbi), accepted.to_string()])?;
    }
    out.table("summary.tsv", &summary)?;
    Ok(Done {
        resolved: json!({
            "psi_deg": psi_deg, "inr_db": inr_db, "samples_per_decision": spd,
            "decisions": decisions, "levels": levels, "cluster_size": cluster_size,
            "measurement": meas.name(), "runs": runs, "schedule_length": schedule_length,
            "record_every": record_every, "sample_rate_hz": sample_rate,
            "init": input.as_ref().map(Input::describe), "seed": seed,
        }),
        seeds,
    })
}

// ---- moving interferer ----

struct Trajectory {
    start_deg: f64,
    stop_deg: f64,
    speed_deg_s: f64,
    sample_rate: f64,
    spd: usize,
}

impl Trajectory {
    fn velocity(&self) -> f64 {
        if self.stop_deg < self.start_deg {
            -self.speed_deg_s
        } else {
            self.speed_deg_s
        }
    }

    /// Decisions until the interferer reaches the stop angle.
    fn decisions(&self) -> CliResult<usize> {
        let secs = (self.stop_deg - self.start_deg).abs() / self.speed_deg_s;
        let n = (secs * self.sample_rate / self.spd as f64).ceil();
        if !(n >= 1.0) || n > 1e10 {
            return Err(CliError::Config(format!("trajectory needs {n} decisions")));
        }
        Ok(n as usize)
    }

    fn scenario(&self, inr_db: f64, seed: u64) -> SignalScenario {
        SignalScenario {
            start_angle_rad: self.start_deg.to_radians(),
            angular_velocity_deg_s: self.velocity(),
            inr_db,
            samples_per_decision: self.spd,
            sample_rate_hz: self.sample_rate,
            seed,
        }
    }
}

fn track_summary(out: &mut Out, traces: &[(u64, ClosedLoopTrace)]) -> CliResult<()> {
    let mut summary = Table::new(&["run", "seed", "median_gain_dbi", "p90_gain_dbi", "final_gain_dbi"]);
    for (r, (sd, tr)) in traces.iter().enumerate() {
        out.table(&format!("trace_{r}.tsv"), &trace_table(tr))?;
        let g: Vec<f64> = tr.records.iter().map(|x| x.true_gain_dbi).collect();
        summary.push(vec![
            r.to_string(),
            sd.to_string(),
            fmt_f64(median(&g)),
            fmt_f64(quantile(&g, 0.9)),
            fmt_f64(tr.final_gain_dbi().unwrap_or(f64::NAN)),
        ])?;
    }
    out.table("summary.tsv", &summary)
}

fn moving(dish: &DishConfig, s: Option<&MovingSection>, ov: &Overrides, out: &mut Out) -> CliResult<Done> {
    let Some(s) = s else {
        return Err(CliError::Missing(vec!["moving".into()]));
    };
    let mut need = Need::new("moving");
    let start = need.req("start_deg", &s.start_deg);
    let stop = need.req("stop_deg", &s.stop_deg);
    let speed = need.req("velocity_deg_s", &s.velocity_deg_s);
    let inr_db = need.req("inr_db", &s.inr_db);
    let spd = need.req("samples_per_decision", &s.samples_per_decision);
    let rate = need.req("sample_rate_hz", &s.sample_rate_hz);
    let levels = need.req("levels", &s.levels);
    need.finish()?;
    let traj = Trajectory {
        start_deg: start.unwrap(),
        stop_deg: stop.unwrap(),
        speed_deg_s: positive("moving.velocity_deg_s", speed.unwrap().abs())?,
        sample_rate: positive("moving.sample_rate_hz", rate.unwrap())?,
        spd: at_least_one("moving.samples_per_decision", spd.unwrap())?,
    };
    let (inr_db, levels) = (inr_db.unwrap(), levels.unwrap());
    let alph = alphabet(levels)?;
    let meas = measurement("moving.measurement", s.measurement.as_ref(), Measurement::ChiSquare)?;
    let warm = s.warm_decisions.unwrap_or(200_000);
    let schedule_length = at_least_one("moving.schedule_length", s.schedule_length.unwrap_or(1))?;
    let record_every = at_least_one("moving.record_every", s.record_every.unwrap_or(100))?;
    let cluster_size = at_least_one("moving.cluster_size", s.cluster_size.unwrap_or(1))?;
    let runs = at_least_one("moving.runs", s.runs.unwrap_or(1))?;
    let seed = ov.seed.or(s.seed).unwrap_or(0);
    let decisions = traj.decisions()?;

    let g = build(dish)?;
    let part = cluster_partition(&g, cluster_size)?;
    let table = trajectory_table(&traj.scenario(inr_db, 0), &g, decisions, GRID_STEP_DEG.to_radians())?;
    let start_table = AngleTable::single(&g, traj.start_deg.to_radians());
    let seeds: Vec<u64> = (0..runs as u64).map(|r| seed.wrapping_add(r)).collect();
    let traces = seeds
        .par_iter()
        .map(|&sd| -> rimnull_core::Result<(u64, ClosedLoopTrace)> {
            let sc = traj.scenario(inr_db, sd);
            let mut st = AnnealSettings::tracking(alph.clone(), decisions, sd);
            st.measurement = meas;
            st.schedule_length = schedule_length;
            st.record_every = record_every;
            st.cluster_size = cluster_size;
            if warm > 0 {
                // Noiseless settle at the start angle before the source moves.
                let fixed = SignalScenario { angular_velocity_deg_s: 0.0, ..sc.clone() };
                let mut w = AnnealSettings::new(alph.clone(), warm, sd ^ 0x5eed_0004);
                w.measurement = Measurement::ExpectedPower;
                w.cluster_size = cluster_size;
                w.record_every = warm;
                st.init = AnnealInit::Provided(anneal_with_table(&fixed, &start_table, &part, &w)?.weights);
            }
            let mut run = rimnull_core::closedloop::anneal::Annealer::new(&sc, &table, &part, &st)?;
            run.run_to_end();
            Ok((sd, run.finish().trace))
        })
        .collect::<rimnull_core::Result<Vec<_>>>()?;
    track_summary(out, &traces)?;
    Ok(Done {
        resolved: json!({
            "start_deg": traj.start_deg, "stop_deg": traj.stop_deg, "velocity_deg_s": traj.velocity(),
            "inr_db": inr_db, "samples_per_decision": traj.spd, "sample_rate_hz": traj.sample_rate,
            "levels": levels, "warm_decisions": warm, "schedule_length": schedule_length,
            "record_every": record_every, "measurement": meas.name(), "cluster_size": cluster_size,
            "runs": runs, "decisions": decisions, "seed": seed,
        }),
        seeds,
    })
}

// ---- weight library ----

fn library_optimizer(name: &str, decisions: usize, inr_db: f64, seed: u64) -> CliResult<LibraryOptimizer> {
    match name {
        "optimal" => Ok(LibraryOptimizer::Optimal),
        "gp" => Ok(LibraryOptimizer::GradientProjection(GpSettings::default())),
        _ => {
            let levels = name.strip_prefix("anneal-").and_then(|t| t.parse::<usize>().ok()).filter(|&m| m >= 2);
            match levels {
                Some(m) => Ok(LibraryOptimizer::NoiselessAnneal { alphabet: alphabet(m)?, decisions, inr_db, seed }),
                None => Err(CliError::Config(format!(
                    "unknown method '{name}'; expected optimal, gp or anneal-<levels>"
                ))),
            }
        }
    }
}

fn library(dish: &DishConfig, s: Option<&LibrarySection>, ov: &Overrides, out: &mut Out) -> CliResult<Done> {
    let Some(s) = s else {
        return Err(CliError::Missing(vec!["library".into()]));
    };
    let mut need = Need::new("library");
    let gs = need.req("grid_start_deg", &s.grid_start_deg);
    let ge = need.req("grid_stop_deg", &s.grid_stop_deg);
    let gstep = need.req("grid_step_deg", &s.grid_step_deg);
    let start = need.req("start_deg", &s.start_deg);
    let stop = need.req("stop_deg", &s.stop_deg);
    let speed = need.req("velocity_deg_s", &s.velocity_deg_s);
    let inr_db = need.req("inr_db", &s.inr_db);
    let spd = need.req("samples_per_decision", &s.samples_per_decision);
    let rate = need.req("sample_rate_hz", &s.sample_rate_hz);
    need.finish()?;
    let grid_deg = grid("library grid", gs.unwrap(), ge.unwrap(), gstep.unwrap())?;
    let traj = Trajectory {
        start_deg: start.unwrap(),
        stop_deg: stop.unwrap(),
        speed_deg_s: positive("library.velocity_deg_s", speed.unwrap().abs())?,
        sample_rate: positive("library.sample_rate_hz", rate.unwrap())?,
        spd: at_least_one("library.samples_per_decision", spd.unwrap())?,
    };
    let inr_db = inr_db.unwrap();
    let seed = ov.seed.or(s.seed).unwrap_or(0);
    let opt_name = ov.method.clone().or(s.optimizer.clone()).unwrap_or_else(|| "anneal-16".into());
    let anneal_decisions = at_least_one("library.anneal_decisions", s.anneal_decisions.unwrap_or(20_000))?;
    let optimizer = library_optimizer(&opt_name, anneal_decisions, inr_db, seed)?;
    let defaults = LibraryTracking::new(1, 0);
    let kernel_width = s.kernel_width.unwrap_or(defaults.kernel_width);
    if !(kernel_width >= 1.0) {
        return Err(CliError::Config("library.kernel_width must be at least 1".into()));
    }
    let schedule_length = at_least_one("library.schedule_length", s.schedule_length.unwrap_or(defaults.schedule_length))?;
    let record_every = at_least_one("library.record_every", s.record_every.unwrap_or(1))?;
    let meas = measurement("library.measurement", s.measurement.as_ref(), defaults.measurement)?;
    let runs = at_least_one("library.runs", s.runs.unwrap_or(1))?;
    let decisions = traj.decisions()?;

    let g = build(dish)?;
    let angles: Vec<f64> = grid_deg.iter().map(|d| d.to_radians()).collect();
    let lib = build_library(&angles, &optimizer, &g)?;
    let mut lt = Table::new(&["index", "psi_deg", "suppression_db", "flagged"]);
    for (i, e) in lib.entries().iter().enumerate() {
        lt.push(vec![
            i.to_string(),
            fmt_f64(e.null_angle_rad.to_degrees()),
            fmt_f64(e.suppression_db),
            (e.flagged as u8).to_string(),
        ])?;
    }
    out.table("library.tsv", &lt)?;

    let table = trajectory_table(&traj.scenario(inr_db, 0), &g, decisions, GRID_STEP_DEG.to_radians())?;
    let seeds: Vec<u64> = (0..runs as u64).map(|r| seed.wrapping_add(r)).collect();
    let traces = seeds
        .par_iter()
        .map(|&sd| {
            let tracking = LibraryTracking {
                kernel_width,
                decisions,
                schedule_length,
                measurement: meas,
                seed: sd,
                record_every,
            };
            track_library_with_table(&traj.scenario(inr_db, sd), &table, &lib, &tracking).map(|t| (sd, t))
        })
        .collect::<rimnull_core::Result<Vec<_>>>()?;
    track_summary(out, &traces)?;
    Ok(Done {
        resolved: json!({
            "grid_start_deg": gs, "grid_stop_deg": ge, "grid_step_deg": gstep,
            "optimizer": opt_name, "anneal_decisions": anneal_decisions,
            "start_deg": traj.start_deg, "stop_deg": traj.stop_deg, "velocity_deg_s": traj.velocity(),
            "inr_db": inr_db, "samples_per_decision": traj.spd, "sample_rate_hz": traj.sample_rate,
            "kernel_width": kernel_width, "schedule_length": schedule_length,
            "record_every": record_every, "measurement": meas.name(), "runs": runs,
            "decisions": decisions, "seed": seed,
        }),
        seeds,
    })
}

// ---- hybrid ----

fn steps_value(s: Option<u64>) -> f64 {
    s.map_or(f64::INFINITY, |k| k as f64)
}

fn hybrid(dish: &DishConfig, s: HybridSection, ov: &Overrides, out: &mut Out) -> CliResult<Done> {
    let mut sc = HybridScenario::new(dish.clone());
    if let Some(q) = s.assumed_feed_taper_q {
        sc.assumed_config.feed_taper_q = q;
    }
    if let Some(p) = s.psi_deg {
        sc.null_angle_rad = p.to_radians();
    }
    if let Some(m) = s.levels {
        sc.alphabet = alphabet(m)?;
    }
    let runs = at_least_one("hybrid.runs", s.runs.unwrap_or(sc.seeds.len()))?;
    let seed = ov.seed.or(s.seed).unwrap_or(0);
    sc.seeds = (0..runs as u64).map(|r| seed.wrapping_add(r)).collect();
    sc.stage1_decisions = at_least_one("hybrid.stage1_decisions", s.stage1_decisions.unwrap_or(sc.stage1_decisions))?;
    sc.stage2_decisions = at_least_one("hybrid.stage2_decisions", s.stage2_decisions.unwrap_or(sc.stage2_decisions))?;
    sc.threshold_dbi = s.threshold_dbi.unwrap_or(sc.threshold_dbi);
    sc.inr_db = s.inr_db.unwrap_or(sc.inr_db);
    sc.stage2_measurement = measurement("hybrid.measurement", s.measurement.as_ref(), sc.stage2_measurement)?;
    let mm = grid(
        "hybrid mismatch",
        s.mismatch_start_deg.unwrap_or(1.0),
        s.mismatch_stop_deg.unwrap_or(3.0),
        s.mismatch_step_deg.unwrap_or(0.05),
    )?;
    let write_traces = s.write_traces.unwrap_or(false);
    sc.validate()?;

    let assumed = build(&sc.assumed_config)?;
    let truth = build(&sc.true_config)?;
    let report = run_hybrid_with(&sc, &assumed, &truth)?;
    let mut t = Table::new(&["seed", "believed_dbi", "actual_dbi", "warm_steps", "cold_steps", "ratio"]);
    for r in &report.runs {
        let ratio = match (r.cold_steps, r.warm_steps) {
            (None, Some(_)) => f64::INFINITY,
            _ => r.ratio().unwrap_or(f64::NAN),
        };
        t.push(vec![
            r.seed.to_string(),
            fmt_f64(r.believed_dbi),
            fmt_f64(r.actual_dbi),
            fmt_f64(steps_value(r.warm_steps)),
            fmt_f64(steps_value(r.cold_steps)),
            fmt_f64(ratio),
        ])?;
    }
    out.table("hybrid.tsv", &t)?;

    let first = &report.runs[0];
    let angles: Vec<f64> = mm.iter().map(|d| d.to_radians()).collect();
    let rows = mismatch_report(&assumed, &truth, &first.stage1_weights.to_weights(), &angles)?;
    let mut m = Table::new(&["psi_deg", "believed_dbi", "actual_dbi", "delta_db"]);
    for r in &rows {
        m.push_f64(&[r.psi_rad.to_degrees(), r.believed_dbi, r.actual_dbi, r.delta_db()])?;
    }
    out.table("mismatch.tsv", &m)?;
    if write_traces {
        for r in &report.runs {
            out.table(&format!("traces/stage1_{}.tsv", r.seed), &trace_table(&r.stage1))?;
            out.table(&format!("traces/warm_{}.tsv", r.seed), &trace_table(&r.warm))?;
            out.table(&format!("traces/cold_{}.tsv", r.seed), &trace_table(&r.cold))?;
        }
    }
    Ok(Done {
        resolved: json!({
            "assumed_feed_taper_q": sc.assumed_config.feed_taper_q,
            "psi_deg": sc.null_angle_rad.to_degrees(), "levels": sc.alphabet.levels(),
            "runs": runs, "stage1_decisions": sc.stage1_decisions, "stage2_decisions": sc.stage2_decisions,
            "threshold_dbi": sc.threshold_dbi, "inr_db": sc.inr_db,
            "measurement": sc.stage2_measurement.name(), "samples_per_decision": sc.samples_per_decision,
            "mismatch_deg": [mm[0], mm[mm.len() - 1], mm.len()],
            "write_traces": write_traces, "seed": seed,
        }),
        seeds: sc.seeds.clone(),
    })
}
