//! Command-line front end: mesh generation and inspection, verification of
//! the orthogonality identities, discrete duality solves, and potential
//! reconstruction, with JSON reports.
//!
//! Exit codes: 0 when all requested verdicts pass, 1 on check failures,
//! 2 on usage errors, 3 on I/O or mesh errors.

mod expr;

use clap::{Args, Parser, Subcommand};
use crrt::duality::{duality_report, NewtonParams, Phi, Psi};
use crrt::mesh::{generate, BoundaryConfig, Diagonal, MeshKind, Triangulation};
use crrt::operators::{
    div_matrix, grad_matrix, integration_by_parts_residual, proj_cr, proj_rt,
};
use crrt::ortho::{
    lift_to_rt, project_rt_field, surjectivity_report, verify_decomposition, verify_identity_a,
    verify_identity_b,
};
use crrt::poincare::{
    cycle_basis, cycle_field, derive_identity_a_via_poincare, dirichlet_boundary_connected,
    reconstruct,
};
use crrt::spaces::{CrFunction, CrSpace, RtField, RtSpace};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "crrt", version, about = "Crouzeix-Raviart / Raviart-Thomas toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a mesh and emit it as JSON.
    Mesh(MeshCmd),
    /// Run orthogonality, decomposition and surjectivity checks.
    Verify(VerifyCmd),
    /// Solve the primal problem and certify the duality gap.
    Solve(SolveCmd),
    /// Cycle fields, potential reconstruction and route agreement.
    Poincare(PoincareCmd),
}

#[derive(Args, Clone)]
struct MeshSource {
    /// Mesh JSON file; alternative to the generator flags.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Generator kind: single_simplex, square_diag, bary3, two_triangles, cube6.
    #[arg(long)]
    kind: Option<String>,
    /// Grid resolution for square_diag.
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Diagonal pattern for square_diag: right, left, crisscross.
    #[arg(long, default_value = "right")]
    diag: String,
    /// Boundary partition: all-d, all-n, bottom-d, topbottom-d.
    #[arg(long, default_value = "all-d")]
    boundary: String,
}

#[derive(Args)]
struct MeshCmd {
    #[command(flatten)]
    source: MeshSource,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyCmd {
    #[command(flatten)]
    source: MeshSource,
    /// Comma-separated list: ortho-a, ortho-b, decomp, surjectivity,
    /// kronecker, ibp, lift, or all.
    #[arg(long, default_value = "all")]
    checks: String,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for triplet exports of the operator matrices.
    #[arg(long)]
    dump_ops: Option<PathBuf>,
}

#[derive(Args)]
struct SolveCmd {
    #[command(flatten)]
    source: MeshSource,
    /// Gradient integrand: quadratic or huber.
    #[arg(long, default_value = "quadratic")]
    phi: String,
    /// Huber regularization parameter.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Zero-order term: quadratic or none.
    #[arg(long, default_value = "quadratic")]
    psi: String,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Data expression over x, y(, z), evaluated at barycenters.
    #[arg(long, default_value = "0")]
    g: String,
    /// Newton residual tolerance.
    #[arg(long, default_value_t = 1e-11)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Include the coefficient vectors in the report.
    #[arg(long)]
    coeffs: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PoincareCmd {
    #[command(flatten)]
    source: MeshSource,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct RunReport {
    version: String,
    command: String,
    mesh: MeshDescriptor,
    tolerance: f64,
    seed: u64,
    checks: Vec<CheckRecord>,
    timings_ms: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct MeshDescriptor {
    source: String,
    dim: usize,
    elements: usize,
    sides: usize,
    dirichlet_sides: usize,
    neumann_sides: usize,
}

#[derive(Serialize)]
struct CheckRecord {
    name: String,
    dims: BTreeMap<String, serde_json::Value>,
    residuals: BTreeMap<String, f64>,
    verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<String>,
}

impl CheckRecord {
    fn new(name: &str) -> Self {
        CheckRecord {
            name: name.to_string(),
            dims: BTreeMap::new(),
            residuals: BTreeMap::new(),
            verdict: "pass".into(),
            detail: None,
        }
    }

    fn detail(mut self, message: &str) -> Self {
        self.detail = Some(message.to_string());
        self
    }

    fn dim(mut self, key: &str, value: usize) -> Self {
        self.dims.insert(key.into(), value.into());
        self
    }

    fn residual(mut self, key: &str, value: f64) -> Self {
        self.residuals.insert(key.into(), value);
        self
    }

    fn verdict(mut self, pass: bool) -> Self {
        self.verdict = if pass { "pass" } else { "fail" }.into();
        self
    }

    fn skipped(mut self, reason: &str) -> Self {
        self.verdict = format!("skipped({reason})");
        self
    }
}

enum CliError {
    Usage(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Io(_) => ExitCode::from(3),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Mesh(cmd) => run_mesh(cmd),
        Command::Verify(cmd) => run_verify(cmd),
        Command::Solve(cmd) => run_solve(cmd),
        Command::Poincare(cmd) => run_poincare(cmd),
    };
    match result {
        Ok(all_pass) => {
            if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            match &e {
                CliError::Usage(msg) => eprintln!("usage error: {msg}"),
                CliError::Io(msg) => eprintln!("error: {msg}"),
            }
            e.exit_code()
        }
    }
}

fn load_mesh(source: &MeshSource) -> Result<(Arc<Triangulation>, String), CliError> {
    if let Some(path) = &source.mesh {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mesh = Triangulation::from_json(&text)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        return Ok((Arc::new(mesh), path.display().to_string()));
    }
    let kind = match source.kind.as_deref() {
        Some("single_simplex") => MeshKind::SingleSimplex,
        Some("bary3") => MeshKind::Bary3,
        Some("two_triangles") => MeshKind::TwoTriangles,
        Some("cube6") => MeshKind::Cube6,
        Some("square_diag") => {
            let diagonal = match source.diag.as_str() {
                "right" => Diagonal::Right,
                "left" => Diagonal::Left,
                "crisscross" => Diagonal::Crisscross,
                other => return Err(CliError::Usage(format!("unknown diagonal `{other}`"))),
            };
            MeshKind::SquareDiag {
                n: source.n,
                diagonal,
            }
        }
        Some(other) => return Err(CliError::Usage(format!("unknown mesh kind `{other}`"))),
        None => {
            return Err(CliError::Usage(
                "either --mesh FILE or --kind KIND is required".into(),
            ))
        }
    };
    let boundary = match source.boundary.as_str() {
        "all-d" => BoundaryConfig::AllDirichlet,
        "all-n" => BoundaryConfig::AllNeumann,
        "bottom-d" => BoundaryConfig::BottomDirichlet,
        "topbottom-d" => BoundaryConfig::TopBottomDirichlet,
        other => return Err(CliError::Usage(format!("unknown boundary `{other}`"))),
    };
    let mesh = generate(kind, boundary).map_err(|e| CliError::Io(e.to_string()))?;
    Ok((
        Arc::new(mesh),
        format!("{}/{}", kind.label(), boundary.label()),
    ))
}

fn describe(mesh: &Triangulation, source: String) -> MeshDescriptor {
    MeshDescriptor {
        source,
        dim: mesh.dim,
        elements: mesh.n_elements(),
        sides: mesh.n_sides(),
        dirichlet_sides: mesh.n_dirichlet_sides(),
        neumann_sides: mesh.n_neumann_sides(),
    }
}

fn emit(report: &RunReport, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report).expect("report serialization cannot fail");
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run_mesh(cmd: MeshCmd) -> Result<bool, CliError> {
    let (mesh, _) = load_mesh(&cmd.source)?;
    let text = mesh.to_json();
    match &cmd.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => println!("{text}"),
    }
    Ok(true)
}

fn run_verify(cmd: VerifyCmd) -> Result<bool, CliError> {
    let started = Instant::now();
    let (mesh, source) = load_mesh(&cmd.source)?;
    let requested: Vec<&str> = if cmd.checks == "all" {
        vec![
            "ortho-a",
            "ortho-b",
            "decomp",
            "surjectivity",
            "kronecker",
            "ibp",
            "lift",
        ]
    } else {
        cmd.checks.split(',').map(str::trim).collect()
    };

    if let Some(dir) = &cmd.dump_ops {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let cr = CrSpace::new(mesh.clone());
        let rt = RtSpace::new(mesh.clone());
        for (name, op) in [
            ("grad.txt", grad_matrix(&cr)),
            ("div.txt", div_matrix(&rt)),
            ("proj_cr.txt", proj_cr(&cr)),
            ("proj_rt.txt", proj_rt(&rt)),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, op.to_triplets())
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        }
    }

    let mut checks = Vec::new();
    let mut timings = BTreeMap::new();
    for name in requested {
        let t0 = Instant::now();
        let record = match name {
            "ortho-a" => {
                let c = verify_identity_a(&mesh, cmd.tol);
                CheckRecord::new(name)
                    .dim("lhs", c.lhs_dim)
                    .dim("rhs", c.rhs_dim)
                    .residual("projector_distance", c.projector_distance)
                    .verdict(c.pass)
            }
            "ortho-b" => {
                let c = verify_identity_b(&mesh, cmd.tol);
                CheckRecord::new(name)
                    .dim("lhs", c.lhs_dim)
                    .dim("rhs", c.rhs_dim)
                    .residual("projector_distance", c.projector_distance)
                    .verdict(c.pass)
            }
            "decomp" => {
                let c = verify_decomposition(&mesh, cmd.tol);
                CheckRecord::new(name)
                    .dim("kernel", c.kernel_dim)
                    .dim("gradients", c.gradient_dim)
                    .dim("ambient", c.ambient_dim)
                    .residual("max_angle_cosine", c.max_angle_cosine)
                    .residual("projector_sum_min_eigenvalue", c.projector_sum_min_eigenvalue)
                    .residual("trace_residual", c.trace_residual)
                    .verdict(c.pass)
            }
            "surjectivity" => {
                let c = surjectivity_report(&mesh);
                CheckRecord::new(name)
                    .dim("elements", c.n_elements)
                    .dim("rank", c.rank)
                    .dim("codim", c.codim)
                    .verdict(c.pass)
            }
            "kronecker" => {
                let defect = kronecker_defect(&mesh);
                CheckRecord::new(name)
                    .residual("max_defect", defect)
                    .verdict(defect <= 1e-12)
            }
            "ibp" => {
                let worst = ibp_random(&mesh, cmd.seed);
                CheckRecord::new(name)
                    .residual("max_residual", worst)
                    .verdict(worst <= 1e-12)
            }
            "lift" => match lift_random(&mesh, cmd.seed) {
                Ok((membership, avg_err)) => CheckRecord::new(name)
                    .residual("max_membership_residual", membership)
                    .residual("max_average_mismatch", avg_err)
                    .verdict(membership <= cmd.tol && avg_err <= 1e-9),
                Err(msg) => CheckRecord::new(name).detail(&msg).verdict(false),
            },
            other => return Err(CliError::Usage(format!("unknown check `{other}`"))),
        };
        timings.insert(name.to_string(), t0.elapsed().as_secs_f64() * 1e3);
        checks.push(record);
    }
    timings.insert("total".into(), started.elapsed().as_secs_f64() * 1e3);

    let all_pass = checks.iter().all(|c| c.verdict != "fail");
    let report = RunReport {
        version: env!("CARGO_PKG_VERSION").into(),
        command: "verify".into(),
        mesh: describe(&mesh, source),
        tolerance: cmd.tol,
        seed: cmd.seed,
        checks,
        timings_ms: timings,
    };
    emit(&report, cmd.out.as_deref())?;
    Ok(all_pass)
}

fn kronecker_defect(mesh: &Arc<Triangulation>) -> f64 {
    let cr = CrSpace::new(mesh.clone());
    let rt = RtSpace::new(mesh.clone());
    let mut worst: f64 = 0.0;
    for (j, &s) in cr.dofs.iter().enumerate() {
        let v = CrFunction::basis(&cr, j);
        let side = &mesh.sides[s];
        for (t, _) in side.adjacent() {
            for &(s2, _) in &mesh.element_sides[t] {
                let val = v.eval(t, &mesh.sides[s2].midpoint).unwrap();
                let expect = if s2 == s { 1.0 } else { 0.0 };
                worst = worst.max((val - expect).abs());
            }
        }
    }
    for (j, &s) in rt.dofs.iter().enumerate() {
        let y = RtField::basis(&rt, j);
        for &s2 in &rt.dofs {
            let expect = if s2 == s { 1.0 } else { 0.0 };
            worst = worst.max((y.normal_trace(s2) - expect).abs());
        }
    }
    worst
}

fn ibp_random(mesh: &Arc<Triangulation>, seed: u64) -> f64 {
    let cr = CrSpace::new(mesh.clone());
    let rt = RtSpace::new(mesh.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let v = CrFunction::from_coeffs(
            &cr,
            DVector::from_fn(cr.n_dofs(), |_, _| rng.gen_range(-1.0..1.0)),
        );
        let y = RtField::from_coeffs(
            &rt,
            DVector::from_fn(rt.n_dofs(), |_, _| rng.gen_range(-1.0..1.0)),
        );
        worst = worst.max(integration_by_parts_residual(&v, &y));
    }
    worst
}

fn lift_random(mesh: &Arc<Triangulation>, seed: u64) -> Result<(f64, f64), String> {
    let rt = RtSpace::new(mesh.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut membership: f64 = 0.0;
    let mut avg_err: f64 = 0.0;
    for _ in 0..20 {
        let z0 = RtField::from_coeffs(
            &rt,
            DVector::from_fn(rt.n_dofs(), |_, _| rng.gen_range(-1.0..1.0)),
        );
        let y = project_rt_field(&z0);
        let lift = lift_to_rt(&y).map_err(|e| e.to_string())?;
        membership = membership.max(lift.membership_residual);
        if lift.constant_part.values != y.values {
            return Err("constant part of the lift differs from the input".into());
        }
        let back = project_rt_field(&lift.field);
        avg_err = avg_err.max((&back.values - &y.values).amax());
    }
    Ok((membership, avg_err))
}

fn run_solve(cmd: SolveCmd) -> Result<bool, CliError> {
    let started = Instant::now();
    let (mesh, source) = load_mesh(&cmd.source)?;
    let phi = match cmd.phi.as_str() {
        "quadratic" => Phi::Quadratic,
        "huber" => {
            if cmd.eps <= 0.0 {
                return Err(CliError::Usage("--eps must be positive".into()));
            }
            Phi::Huber { eps: cmd.eps }
        }
        other => return Err(CliError::Usage(format!("unknown phi `{other}`"))),
    };
    let g_expr = expr::parse(&cmd.g).map_err(CliError::Usage)?;
    let g: Vec<f64> = mesh
        .elements
        .iter()
        .map(|e| g_expr.eval(&e.barycenter))
        .collect();
    let psi = match cmd.psi.as_str() {
        "quadratic" => {
            if cmd.alpha <= 0.0 {
                return Err(CliError::Usage("--alpha must be positive".into()));
            }
            Psi::Quadratic { alpha: cmd.alpha, g }
        }
        "none" => Psi::None,
        other => return Err(CliError::Usage(format!("unknown psi `{other}`"))),
    };

    let cr = CrSpace::new(mesh.clone());
    let rt = RtSpace::new(mesh.clone());
    let params = NewtonParams {
        tol: cmd.tol,
        ..NewtonParams::default()
    };

    let gap_tol = match phi {
        Phi::Quadratic => 1e-9,
        Phi::Huber { .. } => 1e-7,
    };

    let mut checks = Vec::new();
    let mut extra: BTreeMap<String, serde_json::Value> = BTreeMap::new();
    let all_pass = match duality_report(&cr, &rt, &phi, &psi, &params) {
        Ok(rep) => {
            let record = CheckRecord::new("duality-gap")
                .dim("newton_iterations", rep.newton_iterations)
                .residual("primal", rep.primal)
                .residual("dual", rep.dual)
                .residual("gap", rep.gap)
                .residual("relative_gap", rep.relative_gap)
                .residual("fenchel_residual_phi", rep.fenchel_residual_phi)
                .residual("fenchel_residual_psi", rep.fenchel_residual_psi)
                .residual("membership_residual", rep.membership_residual)
                .residual("newton_residual", rep.newton_residual)
                .verdict(rep.relative_gap <= gap_tol && rep.gap >= -1e-10);
            let pass = record.verdict == "pass";
            checks.push(record);
            if cmd.coeffs {
                let sol = crrt::duality::solve_primal(&cr, &phi, &psi, &params)
                    .expect("solve succeeded above");
                let rec = crrt::duality::postprocess_dual(&sol.u, &phi, &psi, &rt)
                    .expect("postprocessing succeeded above");
                extra.insert(
                    "primal_coefficients".into(),
                    serde_json::to_value(sol.u.coeffs.as_slice()).unwrap(),
                );
                extra.insert(
                    "dual_coefficients".into(),
                    serde_json::to_value(rec.field.coeffs.as_slice()).unwrap(),
                );
            }
            pass
        }
        Err(e) => {
            checks.push(
                CheckRecord::new("duality-gap")
                    .detail(&e.to_string())
                    .verdict(false),
            );
            false
        }
    };

    let mut timings = BTreeMap::new();
    timings.insert("total".into(), started.elapsed().as_secs_f64() * 1e3);
    let mut report = serde_json::to_value(RunReport {
        version: env!("CARGO_PKG_VERSION").into(),
        command: "solve".into(),
        mesh: describe(&mesh, source),
        tolerance: cmd.tol,
        seed: cmd.seed,
        checks,
        timings_ms: timings,
    })
    .expect("report serialization cannot fail");
    for (k, v) in extra {
        report[k.as_str()] = v;
    }
    let text = serde_json::to_string_pretty(&report).expect("report serialization cannot fail");
    match &cmd.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => println!("{text}"),
    }
    Ok(all_pass)
}

fn run_poincare(cmd: PoincareCmd) -> Result<bool, CliError> {
    let started = Instant::now();
    let (mesh, source) = load_mesh(&cmd.source)?;
    let cr = CrSpace::new(mesh.clone());
    let rt = RtSpace::new(mesh.clone());
    let mut checks = Vec::new();

    // divergence of every cycle-basis field
    let chains = cycle_basis(&mesh);
    let mut div_worst: f64 = 0.0;
    for chain in &chains {
        let field = cycle_field(&rt, chain).expect("cycle basis chains are valid");
        let div = crrt::operators::rt_divergence(&field);
        div_worst = div_worst.max(div.values.amax());
    }
    checks.push(
        CheckRecord::new("cycle-fields")
            .dim("cycles", chains.len())
            .residual("max_divergence", div_worst)
            .verdict(div_worst <= 1e-12),
    );

    let has_dirichlet = mesh.n_dirichlet_sides() > 0;
    let hypotheses =
        !has_dirichlet || (mesh.dim == 2 && dirichlet_boundary_connected(&mesh));
    if hypotheses {
        let mut rng = ChaCha8Rng::seed_from_u64(cmd.seed);
        let gauge_dof = if has_dirichlet { None } else { cr.dof_of_side(0) };
        let mut worst: f64 = 0.0;
        let mut failure: Option<String> = None;
        for _ in 0..20 {
            let mut coeffs = DVector::from_fn(cr.n_dofs(), |_, _| rng.gen_range(-1.0..1.0));
            if let Some(j) = gauge_dof {
                let offset = coeffs[j];
                coeffs.add_scalar_mut(-offset);
            }
            let v0 = CrFunction::from_coeffs(&cr, coeffs);
            let w = crrt::operators::cr_gradient(&v0);
            match reconstruct(&cr, &w) {
                Ok(v) => worst = worst.max((&v.coeffs - &v0.coeffs).amax()),
                Err(e) => {
                    failure = Some(e.to_string());
                    break;
                }
            }
        }
        checks.push(match failure {
            None => CheckRecord::new("reconstruction")
                .residual("max_round_trip_error", worst)
                .verdict(worst <= cmd.tol),
            Some(msg) => CheckRecord::new("reconstruction").detail(&msg).verdict(false),
        });

        match derive_identity_a_via_poincare(&mesh, cmd.tol) {
            Ok(rep) => checks.push(
                CheckRecord::new("identity-a-via-reconstruction")
                    .dim("complement_dim", rep.complement_dim)
                    .residual("max_midpoint_jump", rep.max_midpoint_jump)
                    .residual("max_kernel_average", rep.max_kernel_average)
                    .verdict(rep.pass),
            ),
            Err(e) => checks.push(
                CheckRecord::new("identity-a-via-reconstruction")
                    .detail(&e.to_string())
                    .verdict(false),
            ),
        }
    } else {
        checks.push(CheckRecord::new("reconstruction").skipped("unsupported boundary"));
        checks
            .push(CheckRecord::new("identity-a-via-reconstruction").skipped("unsupported boundary"));
    }

    let mut timings = BTreeMap::new();
    timings.insert("total".into(), started.elapsed().as_secs_f64() * 1e3);
    let all_pass = checks.iter().all(|c| c.verdict != "fail");
    let report = RunReport {
        version: env!("CARGO_PKG_VERSION").into(),
        command: "poincare".into(),
        mesh: describe(&mesh, source),
        tolerance: cmd.tol,
        seed: cmd.seed,
        checks,
        timings_ms: timings,
    };
    emit(&report, cmd.out.as_deref())?;
    Ok(all_pass)
}
