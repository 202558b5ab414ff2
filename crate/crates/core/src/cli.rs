//! Command-line front end.

use crate::bz_grid::{make_loop, BzGrid};
use crate::energy_plane::raster::CellSize;
use crate::energy_plane::{pbs_direct, pbs_midpoint, sample_bands, ParamStep, PbsSet, MIDPOINT_STEP};
use crate::invariants::vorticity::{DEFAULT_KY_SAMPLES, FLIP_TOL};
use crate::invariants::{
    chern_number, flip_point, flipping_index, gen_vorticity, jacobian_analytic, jacobian_numeric, vorticity,
};
use crate::model::{classify_phase, exceptional_points, KPoint, ModelParams, Sign};
use crate::pattern::{pattern_equivalent, pattern_from_pbs, read_pattern_csv, read_sidecar, write_pattern, Provenance};
use crate::sweep::{
    homotopy_path_check, phase_diagram, write_results, GridConfig, ModelSpan, OutputConfig, RasterConfig, Span,
    SweepConfig, Task,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

type DynError = Box<dyn std::error::Error + Send + Sync>;
type CliResult = Result<(), DynError>;

#[derive(Debug, Parser)]
#[command(name = "nhtopo", version, about = "Complex bands, pseudo-boundary states and invariants of a non-Hermitian Chern insulator")]
pub struct Cli {
    /// Worker threads [default: available parallelism]
    #[arg(long, env = "NHTOPO_WORKERS", global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct ModelArgs {
    /// Hopping amplitude (energy unit)
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub t: f64,
    /// Mass term (units of t)
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub m: f64,
    /// Non-Hermitian strength delta (units of t)
    #[arg(long, default_value_t = 0.25, allow_negative_numbers = true)]
    pub delta: f64,
}

impl ModelArgs {
    fn params(&self) -> Result<ModelParams, crate::model::ModelError> {
        ModelParams::new(self.t, self.m, self.delta)
    }
}

#[derive(Debug, Args, Clone, Copy)]
pub struct GridArgs {
    /// Lattice points along kx (count)
    #[arg(long, default_value_t = 512)]
    pub nx: usize,
    /// Lattice points along ky (count)
    #[arg(long, default_value_t = 512)]
    pub ny: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Direct,
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    Delta,
    M,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write both complex bands on the zone lattice as CSV
    Bands {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Output CSV path (kx, ky, band, e_re, e_im)
        #[arg(long, default_value = "bands.csv")]
        out: PathBuf,
        /// Also write a gnuplot script to this path [default: none]
        #[arg(long)]
        gnuplot_script: Option<PathBuf>,
    },
    /// Detect pseudo-boundary states and write them as CSV with a JSON sidecar
    Pbs {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Raster cell edge in energy units of t, or 'auto' (bounding-box diagonal / 500)
        #[arg(long, default_value = "auto")]
        cell: CellSize,
        /// Detection method
        #[arg(long, value_enum, default_value_t = MethodArg::Direct)]
        method: MethodArg,
        /// Parameter step of the midpoint method (units of t)
        #[arg(long, default_value_t = MIDPOINT_STEP)]
        dp: f64,
        /// Parameter stepped by the midpoint method
        #[arg(long, value_enum, default_value_t = AxisArg::Delta)]
        axis: AxisArg,
        /// Output CSV path (kx, ky, band, e_re, e_im)
        #[arg(long, default_value = "pbs.csv")]
        out: PathBuf,
        /// Also write the zone pattern CSV to this path [default: none]
        #[arg(long)]
        pattern_out: Option<PathBuf>,
        /// Also write a gnuplot script to this path [default: none]
        #[arg(long)]
        gnuplot_script: Option<PathBuf>,
    },
    /// Compare the zone patterns of two PBS or pattern CSV files
    PatternCompare {
        /// First CSV file
        a: PathBuf,
        /// Second CSV file
        b: PathBuf,
        /// Also try the (pi, pi) zone translation
        #[arg(long)]
        modulo_translation: bool,
        /// Dilation budget (lattice cells)
        #[arg(long, default_value_t = 1)]
        budget: usize,
        /// Lattice points along kx when no sidecar is present (count)
        #[arg(long, default_value_t = 512)]
        nx: usize,
        /// Lattice points along ky when no sidecar is present (count)
        #[arg(long, default_value_t = 512)]
        ny: usize,
    },
    /// Chern number by midpoint quadrature of the Berry curvature
    Chern {
        #[command(flatten)]
        model: ModelArgs,
        /// Quadrature lattice size per axis (count)
        #[arg(long, default_value_t = 256)]
        grid: usize,
        /// Band sign (+1 or -1)
        #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
        band: i8,
    },
    /// Energy winding around a circular loop in the zone
    Vorticity {
        #[command(flatten)]
        model: ModelArgs,
        /// Loop center kx (radians)
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        kx: f64,
        /// Loop center ky (radians)
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        ky: f64,
        /// Center the loop on this exceptional point instead (index) [default: none]
        #[arg(long)]
        ep: Option<usize>,
        /// Loop radius (radians)
        #[arg(long, default_value_t = 0.1)]
        radius: f64,
        /// Points on the loop (count)
        #[arg(long, default_value_t = 1024)]
        steps: usize,
    },
    /// Generalized vorticity of the upper band along ky at fixed kx
    Genvort {
        #[command(flatten)]
        model: ModelArgs,
        /// Fixed kx (radians)
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        kx: f64,
        /// Samples along ky (count)
        #[arg(long, default_value_t = DEFAULT_KY_SAMPLES)]
        n_ky: usize,
        /// Write the shifted curve (ky, z_re, z_im) to this CSV [default: none]
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a gnuplot script to this path [default: none]
        #[arg(long)]
        gnuplot_script: Option<PathBuf>,
    },
    /// Flipping index, optionally locating the orientation flip in kx
    Flip {
        #[command(flatten)]
        model: ModelArgs,
        /// Samples along ky (count)
        #[arg(long, default_value_t = DEFAULT_KY_SAMPLES)]
        n_ky: usize,
        /// Locate the kx where the loop orientation flips
        #[arg(long)]
        locate: bool,
        /// Lower end of the search range (radians)
        #[arg(long, default_value_t = -PI, allow_negative_numbers = true)]
        lo: f64,
        /// Upper end of the search range (radians)
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        hi: f64,
        /// Bisection tolerance (radians)
        #[arg(long, default_value_t = FLIP_TOL)]
        tol: f64,
    },
    /// Jacobian of the map from the zone to the energy plane
    Jacobian {
        #[command(flatten)]
        model: ModelArgs,
        /// Evaluation point kx (radians)
        #[arg(long, default_value_t = PI / 2.0, allow_negative_numbers = true)]
        kx: f64,
        /// Evaluation point ky (radians)
        #[arg(long, default_value_t = PI / 4.0, allow_negative_numbers = true)]
        ky: f64,
        /// Finite-difference step (radians)
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
        /// Also compare analytic and numeric determinants at this many random points (count)
        #[arg(long, default_value_t = 0)]
        random: usize,
        /// Seed for the random points
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sweep (m, delta) and write the phase CSV with a manifest
    PhaseDiagram {
        /// JSON config; overrides every other sweep flag [default: none]
        #[arg(long)]
        config: Option<PathBuf>,
        /// Hopping amplitude (energy unit)
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        t: f64,
        /// Mass range as lo,hi,count (units of t)
        #[arg(long, default_value = "-4,4,161", allow_hyphen_values = true)]
        m_range: String,
        /// Delta range as lo,hi,count (units of t)
        #[arg(long, default_value = "-3,3,121", allow_hyphen_values = true)]
        delta_range: String,
        /// Comma-separated tasks out of phase, chern, flip, pbs
        #[arg(long, default_value = "phase")]
        tasks: String,
        /// Zone lattice size per axis for chern and pbs (count)
        #[arg(long, default_value_t = 256)]
        grid: usize,
        /// ky samples for the flipping index (count)
        #[arg(long, default_value_t = DEFAULT_KY_SAMPLES)]
        n_ky: usize,
        /// Raster cell edge in energy units of t, or 'auto'
        #[arg(long, default_value = "auto")]
        cell: CellSize,
        /// Output directory
        #[arg(long, default_value = "phase_out")]
        out_dir: PathBuf,
        /// Also write a gnuplot script to this path [default: none]
        #[arg(long)]
        gnuplot_script: Option<PathBuf>,
    },
    /// Compare patterns along a straight parameter path
    Homotopy {
        /// Start point as m,delta (units of t)
        #[arg(long, default_value = "1.3,0.25", allow_hyphen_values = true)]
        from: String,
        /// End point as m,delta (units of t)
        #[arg(long, default_value = "1.7,0.25", allow_hyphen_values = true)]
        to: String,
        /// Hopping amplitude (energy unit)
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        t: f64,
        /// Points on the path, endpoints included (count)
        #[arg(long, default_value_t = 5)]
        steps: usize,
        #[command(flatten)]
        grid: GridArgs,
        /// Raster cell edge in energy units of t, or 'auto'
        #[arg(long, default_value = "auto")]
        cell: CellSize,
        /// Dilation budget (lattice cells)
        #[arg(long, default_value_t = 1)]
        budget: usize,
        /// Write the per-step report CSV to this path [default: none]
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> DynError {
    Box::new(UsageError(msg.into()))
}

fn parse_list(s: &str, n: usize, what: &str) -> Result<Vec<f64>, DynError> {
    let v: Result<Vec<f64>, _> = s.split(',').map(|x| x.trim().parse::<f64>()).collect();
    match v {
        Ok(v) if v.len() == n => Ok(v),
        _ => Err(usage(format!("{what} expects {n} comma-separated numbers, got '{s}'"))),
    }
}

fn parse_span(s: &str, what: &str) -> Result<Span, DynError> {
    let v = parse_list(s, 3, what)?;
    if v[2] < 0.0 || v[2].fract() != 0.0 {
        return Err(usage(format!("{what} count must be a whole number")));
    }
    Ok(Span(v[0], v[1], v[2] as usize))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    std::fs::write(path, bytes).map_err(|e| format!("IoFailure: {}: {e}", path.display()).into())
}

fn gnuplot_scatter(data: &Path, x: usize, y: usize, xlabel: &str, ylabel: &str, title: &str) -> String {
    format!(
        "set datafile separator ','\nset key off\nset size ratio -1\nset title '{title}'\nset xlabel '{xlabel}'\nset ylabel '{ylabel}'\nplot '{}' every ::1 using {x}:{y} with dots\n",
        data.display()
    )
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return if code == 0 { 0 } else { 2 };
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    match cli.workers {
        Some(0) => {
            eprintln!("error: --workers must be at least 1");
            return 2;
        }
        Some(n) => pool = pool.num_threads(n),
        None => {}
    }
    let result = match pool.build() {
        Ok(pool) => pool.install(|| dispatch(cli.command)),
        Err(e) => Err(format!("cannot start worker pool: {e}").into()),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is::<UsageError>() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(cmd: Command) -> CliResult {
    let mut out = std::io::stdout().lock();
    match cmd {
        Command::Bands { model, grid, out: path, gnuplot_script } => {
            let p = model.params()?;
            let g = BzGrid::new(grid.nx, grid.ny)?;
            let s = sample_bands(&p, &g);
            let mut buf = Vec::new();
            writeln!(buf, "kx,ky,band,e_re,e_im")?;
            for band in crate::model::BANDS {
                for gi in g.indices() {
                    let k = g.k_at(gi);
                    let e = s.energy(gi, band);
                    writeln!(buf, "{},{},{},{},{}", k.kx, k.ky, band.as_i8(), e.re, e.im)?;
                }
            }
            write_file(&path, &buf)?;
            if let Some(gp) = gnuplot_script {
                write_file(&gp, gnuplot_scatter(&path, 4, 5, "Re E", "Im E", "complex bands").as_bytes())?;
            }
            writeln!(out, "wrote {} samples to {}", s.len(), path.display())?;
        }
        Command::Pbs { model, grid, cell, method, dp, axis, out: path, pattern_out, gnuplot_script } => {
            let p = model.params()?;
            let g = BzGrid::new(grid.nx, grid.ny)?;
            let set: PbsSet = match method {
                MethodArg::Direct => pbs_direct(&p, &g, cell)?,
                MethodArg::Midpoint => {
                    let step = match axis {
                        AxisArg::Delta => ParamStep::delta(dp),
                        AxisArg::M => ParamStep::mass(dp),
                    };
                    pbs_midpoint(&p, step, &g, cell)?
                }
            };
            let mut buf = Vec::new();
            set.write_csv(&mut buf)?;
            write_file(&path, &buf)?;
            let prov = Provenance {
                params: set.params,
                nx: g.nx(),
                ny: g.ny(),
                method: set.method.to_string(),
                cell: set.cell,
            };
            let sidecar = path.with_extension("json");
            write_file(&sidecar, serde_json::to_string_pretty(&prov)?.as_bytes())?;
            let pattern = pattern_from_pbs(&set, &g)?;
            if let Some(pp) = pattern_out {
                write_pattern(&pattern, &pp)?;
            }
            if let Some(gp) = gnuplot_script {
                write_file(&gp, gnuplot_scatter(&path, 1, 2, "kx", "ky", "PBS pattern").as_bytes())?;
            }
            let mass = set.mass_line_entries().len();
            writeln!(
                out,
                "method={} entries={} pattern_cells={} mass_line_entries={} cell={}",
                set.method,
                set.len(),
                pattern.len(),
                mass,
                set.cell
            )?;
        }
        Command::PatternCompare { a, b, modulo_translation, budget, nx, ny } => {
            let grid_for = |path: &Path| -> Result<BzGrid, DynError> {
                match read_sidecar(path) {
                    Some(Provenance { nx, ny, .. }) => Ok(BzGrid::new(nx, ny)?),
                    None => Ok(BzGrid::new(nx, ny)?),
                }
            };
            let pa = read_pattern_csv(&a, &grid_for(&a)?)?;
            let pb = read_pattern_csv(&b, &grid_for(&b)?)?;
            if modulo_translation && (pa.grid.nx() % 2 == 1 || pa.grid.ny() % 2 == 1) {
                return Err(crate::bz_grid::GridError::OddResolution { nx: pa.grid.nx(), ny: pa.grid.ny() }.into());
            }
            let v = pattern_equivalent(&pa, &pb, budget, modulo_translation)?;
            writeln!(
                out,
                "{} shift={} distance_cells={} unmatched={} hausdorff={}",
                if v.equal { "EQUAL" } else { "NOT-EQUAL" },
                v.applied_shift,
                v.distance_cells,
                v.unmatched,
                v.hausdorff
            )?;
        }
        Command::Chern { model, grid, band } => {
            let p = model.params()?;
            let band = match band {
                1 => Sign::Plus,
                -1 => Sign::Minus,
                _ => return Err(usage("--band must be 1 or -1")),
            };
            let g = BzGrid::square(grid)?;
            if let Ok(c) = classify_phase(&p) {
                if c.kind != crate::model::PhaseKind::GappedC {
                    eprintln!("warning: parameters are in a gapless phase ({})", c.gapless_label());
                }
            }
            let c = chern_number(&p, band, &g)?;
            writeln!(out, "chern_re,chern_im")?;
            writeln!(out, "{},{}", c.value.re, c.value.im)?;
        }
        Command::Vorticity { model, kx, ky, ep, radius, steps } => {
            let p = model.params()?;
            let center = match ep {
                Some(i) => {
                    let eps = exceptional_points(&p);
                    *eps.get(i).ok_or_else(|| usage(format!("--ep {i}: only {} exceptional points", eps.len())))?
                }
                None => KPoint::new(kx, ky),
            };
            let l = make_loop(center, radius, steps)?;
            let v = vorticity(&p, &l)?;
            writeln!(out, "center_kx,center_ky,radius,vorticity")?;
            writeln!(out, "{},{},{},{}", center.kx, center.ky, radius, v.value)?;
        }
        Command::Genvort { model, kx, n_ky, out: path, gnuplot_script } => {
            let p = model.params()?;
            let g = gen_vorticity(&p, kx, n_ky)?;
            writeln!(out, "kx,mu_re,mu_im,orientation,signed_area,branch_jumps")?;
            writeln!(out, "{},{},{},{},{},{}", g.kx, g.mu.re, g.mu.im, g.orientation, g.signed_area, g.branch_jumps)?;
            if let Some(path) = path {
                let mut buf = Vec::new();
                writeln!(buf, "ky,z_re,z_im")?;
                for (j, z) in g.samples.iter().enumerate() {
                    let ky = -PI + 2.0 * PI * j as f64 / n_ky as f64;
                    writeln!(buf, "{},{},{}", ky, z.re, z.im)?;
                }
                write_file(&path, &buf)?;
                if let Some(gp) = gnuplot_script {
                    let script = format!(
                        "set datafile separator ','\nset key off\nset size ratio -1\nset xlabel 'Re z'\nset ylabel 'Im z'\nplot '{}' every ::1 using 2:3 with lines\n",
                        path.display()
                    );
                    write_file(&gp, script.as_bytes())?;
                }
            } else if gnuplot_script.is_some() {
                return Err(usage("--gnuplot-script needs --out"));
            }
        }
        Command::Flip { model, n_ky, locate, lo, hi, tol } => {
            let p = model.params()?;
            let f = flipping_index(&p, n_ky)?;
            writeln!(out, "theta_r,theta_i")?;
            writeln!(out, "{},{}", f.theta_r, f.theta_i)?;
            if locate {
                match flip_point(&p, (lo, hi), tol, n_ky)? {
                    Some(x) => writeln!(out, "flip_kx={x}")?,
                    None => writeln!(out, "flip_kx=none")?,
                }
            }
        }
        Command::Jacobian { model, kx, ky, h, random, seed } => {
            let p = model.params()?;
            let k = KPoint::new(kx, ky);
            let a = jacobian_analytic(k, &p)?;
            let n = jacobian_numeric(k, &p, h)?;
            writeln!(out, "kx,ky,det_analytic,det_numeric")?;
            writeln!(out, "{},{},{},{}", kx, ky, a.det, n.det)?;
            if random > 0 {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let mut worst: f64 = 0.0;
                let mut used = 0;
                while used < random {
                    let k = KPoint::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
                    let Ok(a) = jacobian_analytic(k, &p) else { continue };
                    let n = jacobian_numeric(k, &p, h)?;
                    worst = worst.max((a.det - n.det).abs());
                    used += 1;
                }
                writeln!(out, "random_points={used} seed={seed} max_abs_diff={worst}")?;
            }
        }
        Command::PhaseDiagram {
            config,
            t,
            m_range,
            delta_range,
            tasks,
            grid,
            n_ky,
            cell,
            out_dir,
            gnuplot_script,
        } => {
            let cfg = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| format!("IoFailure: {}: {e}", path.display()))?;
                    SweepConfig::from_json(&text)?
                }
                None => {
                    let mut list = Vec::new();
                    for name in tasks.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                        let task = match name {
                            "phase" => Task::Phase,
                            "chern" => Task::Chern,
                            "flip" => Task::Flip,
                            "pbs" => Task::Pbs,
                            other => return Err(usage(format!("unknown task '{other}'"))),
                        };
                        list.push(task);
                    }
                    let cfg = SweepConfig {
                        model: ModelSpan {
                            t,
                            m_range: parse_span(&m_range, "--m-range")?,
                            delta_range: parse_span(&delta_range, "--delta-range")?,
                        },
                        grid: GridConfig { nx: grid, ny: grid, n_ky },
                        raster: RasterConfig { cell },
                        tasks: list,
                        output: OutputConfig { dir: out_dir },
                        workers: None,
                    };
                    cfg.validate().map_err(|e| usage(e.to_string()))?;
                    cfg
                }
            };
            let cells = phase_diagram(&cfg)?;
            let files = write_results(&cells, &cfg)?;
            if let Some(gp) = gnuplot_script {
                let phase = cfg.output.dir.join("phase.csv");
                let script = format!(
                    "set datafile separator ','\nset xlabel 'm'\nset ylabel 'delta'\nplot '{0}' every ::1 using 1:(strcol(3) eq 'GaplessNu' ? $2 : 1/0) with points pt 5 ps 0.3 title 'gapless', '{0}' every ::1 using 1:(strcol(3) eq 'GappedC' ? $2 : 1/0) with points pt 5 ps 0.3 title 'gapped'\n",
                    phase.display()
                );
                write_file(&gp, script.as_bytes())?;
            }
            let gapped = cells.iter().filter(|c| c.phase.as_ref().is_some_and(|p| p.kind == crate::model::PhaseKind::GappedC)).count();
            let errors = cells.iter().filter(|c| !c.errors.is_empty()).count();
            writeln!(
                out,
                "cells={} gapped={} with_errors={} files={} config_sha256={}",
                cells.len(),
                gapped,
                errors,
                files.len(),
                cfg.hash()
            )?;
        }
        Command::Homotopy { from, to, t, steps, grid, cell, budget, out: path } => {
            let a = parse_list(&from, 2, "--from")?;
            let b = parse_list(&to, 2, "--to")?;
            let start = ModelParams::new(t, a[0], a[1])?;
            let end = ModelParams::new(t, b[0], b[1])?;
            let g = BzGrid::new(grid.nx, grid.ny)?;
            let report = homotopy_path_check(&start, &end, steps, &g, cell, budget)?;
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            match &path {
                Some(p) => write_file(p, &buf)?,
                None => out.write_all(&buf)?,
            }
            writeln!(out, "{}", if report.pass { "PASS" } else { "FAIL" })?;
            if let Some(i) = report.phase_crossing {
                let s = &report.steps[i];
                return Err(format!(
                    "PhaseCrossing: step {i} (m={}, delta={}) leaves the starting phase",
                    s.params.m(),
                    s.params.delta()
                )
                .into());
            }
        }
    }
    out.flush()?;
    Ok(())
}
