//! Analysis commands. Each command builds a deterministic [`Report`] from a
//! resolved run description; file placement stays in the binary.

use simbound_core::analysis::{condition_battery, similarity_dimension};
use simbound_core::attractor::{box_count, self_consistency, AttractorApprox};
use simbound_core::boundary::{
    check_inverse_invariance, cluster_witnesses, default_tau, overlap_pairs, similarity_boundary,
    tile_topological_boundary, BoundaryApprox, OverlapScan,
};
use simbound_core::codespace::RatioTable;
use simbound_core::measure::{branch_measures, mu_boundary, DEFAULT_REFINE};
use simbound_core::spaces::{validate_similitude, IfsSpec};
use simbound_core::{Backend, Result};

use crate::render::render_svg;
use crate::report::Report;

/// Fully resolved run: flags override spec file parameters, which override
/// the defaults filled in by [`Run::resolve`].
#[derive(Clone, Debug)]
pub struct Run {
    pub ifs: IfsSpec,
    pub depth: u32,
    pub tol: Option<f64>,
    pub grid: Option<f64>,
    pub budget: u64,
    pub seed: u64,
}

pub const DEFAULT_DEPTH: u32 = 6;

impl Run {
    pub fn resolve(
        ifs: IfsSpec,
        params: &crate::specfile::RunParams,
        depth: Option<u32>,
        tol: Option<f64>,
        grid: Option<f64>,
        budget: Option<u64>,
        seed: Option<u64>,
    ) -> Run {
        Run {
            ifs,
            depth: depth.or(params.depth).unwrap_or(DEFAULT_DEPTH),
            tol: tol.or(params.tol),
            grid: grid.or(params.grid),
            budget: budget.or(params.budget).unwrap_or(simbound_core::codespace::DEFAULT_BUDGET),
            seed: seed.or(params.seed).unwrap_or(0),
        }
    }

    fn approx(&self) -> Result<AttractorApprox> {
        AttractorApprox::compute(&self.ifs, self.depth, self.budget)
    }

    fn tau_for(&self, approx: &AttractorApprox) -> f64 {
        self.tol.unwrap_or_else(|| default_tau(&self.ifs, approx))
    }

    fn boundary(&self, approx: &AttractorApprox) -> Result<(f64, OverlapScan, BoundaryApprox)> {
        let tau = self.tau_for(approx);
        let scan = overlap_pairs(approx, tau)?;
        let boundary = similarity_boundary(&self.ifs, approx, &scan)?;
        Ok((tau, scan, boundary))
    }
}

fn run_section(report: &mut Report, run: &Run) {
    report.push("run", "system", run.ifs.name.clone());
    report.push("run", "backend", run.ifs.backend().name());
    report.push("run", "maps", run.ifs.n_maps().to_string());
    report.push("run", "depth", run.depth.to_string());
}

pub fn cmd_dim(run: &Run) -> Result<Report> {
    let mut report = Report::new();
    run_section(&mut report, run);
    let ratios = run.ifs.ratios();
    let alpha = similarity_dimension(&ratios)?;
    let residual: f64 = ratios.iter().map(|r| r.powf(alpha)).sum::<f64>() - 1.0;
    let mut worst = 0f64;
    for map in run.ifs.maps() {
        let v = validate_similitude(map, 64, run.seed);
        worst = worst.max(v.max_relative_deviation);
    }
    report.push_real("dim", "alpha", alpha);
    report.push_real("dim", "residual", residual);
    for (i, r) in ratios.iter().enumerate() {
        report.push_real("dim", &format!("ratio_{}", i + 1), *r);
    }
    report.push_real("dim", "scaling_deviation_max", worst);
    Ok(report)
}

pub fn cmd_attractor(run: &Run) -> Result<Report> {
    let mut report = Report::new();
    run_section(&mut report, run);
    let approx = run.approx()?;
    report.push("attractor", "points", approx.len().to_string());
    report.push_real("attractor", "ball_radius", approx.ball_radius());
    report.push_real("attractor", "max_error", approx.max_error());
    report.push_real("attractor", "self_consistency", self_consistency(&run.ifs, &approx)?);
    let h = run.grid.unwrap_or(2.0 * approx.max_error());
    report.push_real("attractor", "grid_cell", h);
    report.push("attractor", "occupied_cells", box_count(&approx, h).to_string());
    Ok(report)
}

fn boundary_sections(report: &mut Report, run: &Run, approx: &AttractorApprox) -> Result<BoundaryApprox> {
    let (tau, scan, boundary) = run.boundary(approx)?;
    report.push_real("boundary", "tau", tau);
    report.push("boundary", "witnesses", boundary.len().to_string());
    let n = run.ifs.n_maps();
    for a in 1..=n {
        for b in (a + 1)..=n {
            report.push(
                "boundary",
                &format!("pair_{a}_{b}"),
                scan.pair_count(a, b).to_string(),
            );
        }
    }
    let clusters = cluster_witnesses(&boundary, 2.0 * tau);
    report.push("boundary", "clusters", clusters.len().to_string());
    for (k, cluster) in clusters.iter().enumerate() {
        let id = k + 1;
        report.push(
            "boundary",
            &format!("cluster_{id}_size"),
            cluster.members.len().to_string(),
        );
        let bp = boundary.points();
        match bp.backend() {
            Backend::Euclidean => {
                let dim = bp.dim().unwrap_or(0);
                let mut center = vec![0.0; dim];
                for &m in &cluster.members {
                    let c = bp.euclidean_coords(m).expect("euclidean backend");
                    for a in 0..dim {
                        center[a] += c[a];
                    }
                }
                for v in &mut center {
                    *v /= cluster.members.len() as f64;
                }
                let spread = cluster
                    .members
                    .iter()
                    .map(|&m| {
                        let c = bp.euclidean_coords(m).expect("euclidean backend");
                        (0..dim).map(|a| (c[a] - center[a]).powi(2)).sum::<f64>().sqrt()
                    })
                    .fold(0.0, f64::max);
                for (a, v) in center.iter().enumerate() {
                    report.push_real("boundary", &format!("cluster_{id}_center_{a}"), *v);
                }
                report.push_real("boundary", &format!("cluster_{id}_spread"), spread);
            }
            Backend::Sequence => {
                let max_norm = cluster
                    .members
                    .iter()
                    .map(|&m| {
                        bp.sequence_point(m).expect("sequence backend").l1_norm().to_f64()
                    })
                    .fold(0.0, f64::max);
                report.push_real("boundary", &format!("cluster_{id}_max_norm"), max_norm);
            }
        }
    }
    Ok(boundary)
}

pub fn cmd_boundary(run: &Run) -> Result<Report> {
    let mut report = Report::new();
    run_section(&mut report, run);
    let approx = run.approx()?;
    boundary_sections(&mut report, run, &approx)?;
    Ok(report)
}

pub fn cmd_invariance(run: &Run) -> Result<Report> {
    let mut report = Report::new();
    run_section(&mut report, run);
    let approx = run.approx()?;
    let boundary = boundary_sections(&mut report, run, &approx)?;
    let inv = check_inverse_invariance(&run.ifs, &approx, &boundary)?;
    report.push("invariance", "status", inv.status.name());
    report.push_real("invariance", "threshold", inv.threshold);
    report.push_real("invariance", "max_deviation", inv.max_deviation);
    report.push("invariance", "checked", inv.checked.to_string());
    report.push("invariance", "outside", inv.outside.to_string());
    report.push("invariance", "ambiguous", inv.ambiguous.to_string());
    report.push("invariance", "violations", inv.violations.len().to_string());
    for (k, v) in inv.violations.iter().take(3).enumerate() {
        let id = k + 1;
        report.push("invariance", &format!("violation_{id}_map"), v.map.to_string());
        report.push(
            "invariance",
            &format!("violation_{id}_witness"),
            v.witness.to_string(),
        );
        report.push_real(
            "invariance",
            &format!("violation_{id}_distance"),
            v.boundary_distance,
        );
    }
    Ok(report)
}

pub fn cmd_measure(run: &Run) -> Result<Report> {
    let mut report = Report::new();
    run_section(&mut report, run);
    let approx = run.approx()?;
    let table = RatioTable::new(run.ifs.ratios())?;
    let alpha = similarity_dimension(&run.ifs.ratios())?;
    let masses = branch_measures(&run.ifs, &approx, &table, DEFAULT_REFINE)?;
    report.push_real("measure", "alpha", alpha);
    for (i, branch) in masses.branches.iter().enumerate() {
        let id = i + 1;
        report.push_real("measure", &format!("branch_{id}_lower"), branch.estimate.lower);
        report.push_real("measure", &format!("branch_{id}_upper"), branch.estimate.upper);
        report.push_real("measure", &format!("branch_{id}_analytic"), branch.analytic_lower);
    }
    for &(a, b, ref est) in &masses.overlaps {
        report.push_real("measure", &format!("overlap_{a}_{b}_upper"), est.upper);
    }
    let (_, _, boundary) = run.boundary(&approx)?;
    let mass = mu_boundary(&run.ifs, &approx, &table, &boundary, DEFAULT_REFINE)?;
    report.push_real("measure", "boundary_lower", mass.lower);
    report.push_real("measure", "boundary_upper", mass.upper);
    Ok(report)
}

pub fn cmd_battery(run: &Run) -> Result<Report> {
    let mut report = Report::new();
    run_section(&mut report, run);
    let battery = condition_battery(&run.ifs, run.depth, run.tol, run.budget)?;
    report.push_real("battery", "tau", battery.tau);
    report.push_real("battery", "alpha", battery.alpha);
    report.push_real("battery", "epsilon", battery.epsilon);
    report.push("battery", "precondition", battery.precondition.name());
    report.push("battery", "applicable", battery.applicable.to_string());
    report.push("battery", "consistent", battery.consistent.to_string());
    match battery.disagreement {
        Some((s, r)) => {
            report.push("battery", "disagreement", format!("{s},{r}"));
        }
        None => report.push("battery", "disagreement", "none"),
    }
    for entry in &battery.entries {
        let id = entry.id;
        report.push("battery", &format!("condition_{id}_label"), entry.label);
        report.push("battery", &format!("condition_{id}_status"), entry.status.name());
        for (key, value) in &entry.evidence {
            report.push_real("battery", &format!("condition_{id}_{key}"), *value);
        }
    }
    Ok(report)
}

pub fn cmd_tilecheck(run: &Run) -> Result<Report> {
    let mut report = Report::new();
    run_section(&mut report, run);
    let approx = run.approx()?;
    let (_, _, boundary) = run.boundary(&approx)?;
    let alpha = similarity_dimension(&run.ifs.ratios())?;
    let tile = tile_topological_boundary(&run.ifs, &approx, &boundary, alpha)?;
    report.push_real("tilecheck", "alpha", tile.alpha);
    report.push("tilecheck", "ambient", tile.ambient.to_string());
    report.push_real("tilecheck", "cell", tile.cell);
    report.push("tilecheck", "topological_cells", tile.topological_cells.to_string());
    report.push("tilecheck", "similarity_cells", tile.similarity_cells.to_string());
    report.push("tilecheck", "relation", tile.relation.name());
    Ok(report)
}

pub fn cmd_render(run: &Run) -> Result<(Report, String)> {
    let mut report = Report::new();
    run_section(&mut report, run);
    let approx = run.approx()?;
    let (_, _, boundary) = run.boundary(&approx)?;
    let svg = render_svg(&approx, Some(&boundary))?;
    report.push("render", "points", approx.len().to_string());
    report.push("render", "witnesses", boundary.len().to_string());
    report.push("render", "svg_bytes", svg.len().to_string());
    Ok((report, svg))
}

/// Optional SVG sidecar for any command that computed planar data.
pub fn svg_for(run: &Run) -> Result<String> {
    let approx = run.approx()?;
    let (_, _, boundary) = run.boundary(&approx)?;
    render_svg(&approx, Some(&boundary))
}
