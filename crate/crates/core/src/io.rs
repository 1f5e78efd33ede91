//! Deterministic persistence: CSV snapshots and JSON manifests for
//! profiles, trajectories, kernel fields, entropy traces, check reports,
//! and limit reports.
//!
//! Every float is encoded with 17 significant digits, which reproduces the
//! f64 bit pattern on parse; JSON goes through ordered maps.  Writing,
//! reading back, and writing again therefore yields byte-identical files,
//! and fixed inputs yield byte-identical artifacts across runs.
//!
//! Formats:
//!
//! ```text
//!   profile CSV     t,x,a,b          one row per node (sphere)
//!                   t,index,side     one row per axis (torus)
//!   trajectory dir  profile_NNNN.csv + trajectory.json manifest
//!   kernel dir      kernel.csv (l,t,x,theta_or_coord,u,dmu) + kernel.json
//!   entropy CSV     s,W,residual,dW_numeric,f_min,f_max,f_var
//!   reports         CheckReport / LimitReport as pretty JSON
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::EntropyTrace;
use crate::flow::FlowTrajectory;
use crate::geometry::{ProfileKind, WarpedProfile};
use crate::kernel::{KernelData, KernelDirection, KernelField};
use crate::report::CheckReport;
use crate::soliton::LimitReport;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed {what} in {path}: {detail}")]
    Malformed {
        what: &'static str,
        path: String,
        detail: String,
    },
}

fn malformed(what: &'static str, path: &Path, detail: impl Into<String>) -> IoError {
    IoError::Malformed {
        what,
        path: path.display().to_string(),
        detail: detail.into(),
    }
}

/// 17-significant-digit decimal encoding; parses back to identical bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str, what: &'static str, path: &Path) -> Result<f64, IoError> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| malformed(what, path, format!("bad number {s:?}: {e}")))
}

fn parse_usize(s: &str, what: &'static str, path: &Path) -> Result<usize, IoError> {
    s.trim()
        .parse::<usize>()
        .map_err(|e| malformed(what, path, format!("bad index {s:?}: {e}")))
}

fn split_row<'a>(
    line: &'a str,
    want: usize,
    what: &'static str,
    path: &Path,
) -> Result<Vec<&'a str>, IoError> {
    let cols: Vec<&str> = line.split(',').collect();
    if cols.len() != want {
        return Err(malformed(
            what,
            path,
            format!("expected {want} columns, got {}: {line:?}", cols.len()),
        ));
    }
    Ok(cols)
}

pub fn write_profile_csv(path: &Path, p: &WarpedProfile) -> Result<(), IoError> {
    let mut out = String::new();
    match p.kind {
        ProfileKind::WarpedSphere => {
            out.push_str("t,x,a,b\n");
            let h = p.h();
            for i in 0..=p.grid_m {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt_f64(p.time),
                    fmt_f64(i as f64 * h),
                    fmt_f64(p.a[i]),
                    fmt_f64(p.b[i])
                ));
            }
        }
        ProfileKind::FlatTorus => {
            out.push_str("t,index,side\n");
            for (i, side) in p.sides.iter().enumerate() {
                out.push_str(&format!("{},{i},{}\n", fmt_f64(p.time), fmt_f64(*side)));
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a profile snapshot; the kind is recognized from the header.  The
/// CSV does not carry `n`, and the torus format does not carry the cell
/// count, so both are supplied (`grid_m` is validated against the node
/// rows on spheres).
pub fn read_profile_csv(path: &Path, n: usize, grid_m: usize) -> Result<WarpedProfile, IoError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| malformed("profile", path, "empty file"))?;
    match header {
        "t,x,a,b" => {
            let mut time = 0.0;
            let mut a = Vec::new();
            let mut b = Vec::new();
            for line in lines {
                let cols = split_row(line, 4, "profile", path)?;
                time = parse_f64(cols[0], "profile", path)?;
                a.push(parse_f64(cols[2], "profile", path)?);
                b.push(parse_f64(cols[3], "profile", path)?);
            }
            if a.len() != grid_m + 1 {
                return Err(malformed(
                    "profile",
                    path,
                    format!("expected {} node rows, got {}", grid_m + 1, a.len()),
                ));
            }
            Ok(WarpedProfile {
                n,
                kind: ProfileKind::WarpedSphere,
                time,
                grid_m,
                a,
                b,
                sides: Vec::new(),
            })
        }
        "t,index,side" => {
            let mut time = 0.0;
            let mut sides = Vec::new();
            for line in lines {
                let cols = split_row(line, 3, "profile", path)?;
                time = parse_f64(cols[0], "profile", path)?;
                let idx = parse_usize(cols[1], "profile", path)?;
                if idx != sides.len() {
                    return Err(malformed(
                        "profile",
                        path,
                        format!("axis rows out of order at index {idx}"),
                    ));
                }
                sides.push(parse_f64(cols[2], "profile", path)?);
            }
            if sides.len() != n {
                return Err(malformed(
                    "profile",
                    path,
                    format!("expected {n} axis rows, got {}", sides.len()),
                ));
            }
            Ok(WarpedProfile {
                n,
                kind: ProfileKind::FlatTorus,
                time,
                grid_m,
                a: Vec::new(),
                b: Vec::new(),
                sides,
            })
        }
        other => Err(malformed(
            "profile",
            path,
            format!("unknown header {other:?}"),
        )),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryManifest {
    n: usize,
    kind: ProfileKind,
    #[serde(rename = "T0", skip_serializing_if = "Option::is_none", default)]
    t0: Option<f64>,
    times: Vec<f64>,
    #[serde(rename = "D0", skip_serializing_if = "Option::is_none", default)]
    d0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    kappa: Option<f64>,
    exact: bool,
    grid_m: usize,
}

fn snapshot_name(i: usize) -> String {
    format!("profile_{i:04}.csv")
}

/// Writes one profile CSV per snapshot plus a `trajectory.json` manifest.
pub fn write_trajectory_dir(dir: &Path, tr: &FlowTrajectory) -> Result<(), IoError> {
    fs::create_dir_all(dir)?;
    for (i, p) in tr.profiles.iter().enumerate() {
        write_profile_csv(&dir.join(snapshot_name(i)), p)?;
    }
    let first = &tr.profiles[0];
    let manifest = TrajectoryManifest {
        n: first.n,
        kind: first.kind,
        t0: tr.t0.is_finite().then_some(tr.t0),
        times: tr.profiles.iter().map(|p| p.time).collect(),
        d0: tr.d0,
        kappa: tr.kappa,
        exact: tr.exact,
        grid_m: first.grid_m,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(dir.join("trajectory.json"), json + "\n")?;
    Ok(())
}

pub fn read_trajectory_dir(dir: &Path) -> Result<FlowTrajectory, IoError> {
    let manifest_path = dir.join("trajectory.json");
    let manifest: TrajectoryManifest =
        serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
    let mut profiles = Vec::with_capacity(manifest.times.len());
    for (i, &t) in manifest.times.iter().enumerate() {
        let p = read_profile_csv(&dir.join(snapshot_name(i)), manifest.n, manifest.grid_m)?;
        if p.kind != manifest.kind || (p.time - t).abs() > 0.0 {
            return Err(malformed(
                "trajectory",
                &manifest_path,
                format!("snapshot {i} disagrees with the manifest"),
            ));
        }
        profiles.push(p);
    }
    if profiles.is_empty() {
        return Err(malformed("trajectory", &manifest_path, "no snapshots"));
    }
    Ok(FlowTrajectory {
        profiles,
        t0: manifest.t0.unwrap_or(f64::INFINITY),
        exact: manifest.exact,
        d0: manifest.d0,
        kappa: manifest.kappa,
        error_estimate: None,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct KernelSource {
    x0: f64,
    direction: KernelDirection,
}

#[derive(Debug, Serialize, Deserialize)]
struct KernelSolver {
    /// Initial march step ε/20; 0 for closed-form fields.
    dt: f64,
    #[serde(rename = "M")]
    m: usize,
    scheme: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct KernelManifest {
    source: KernelSource,
    /// Source time of the field.
    l: f64,
    /// Seed offset ε; 0 for closed-form fields.
    eps: f64,
    times: Vec<f64>,
    solver: KernelSolver,
    n: usize,
    kind: ProfileKind,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    source_dmu: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    sides: Vec<f64>,
}

/// Writes `kernel.csv` (all stored slices, `l,t,x,theta_or_coord,u,dmu`)
/// and the `kernel.json` manifest.  Radial rows run per slice and node with
/// x the grid coordinate and θ = πx; torus rows run per slice, axis, and
/// node with x the axis index and the coordinate the displacement along it.
pub fn write_kernel_dir(dir: &Path, kf: &KernelField) -> Result<(), IoError> {
    fs::create_dir_all(dir)?;
    let mut csv = String::from("l,t,x,theta_or_coord,u,dmu\n");
    let l = fmt_f64(kf.source_time);
    match &kf.data {
        KernelData::Radial {
            grid_m,
            values,
            measures,
            source_measures: _,
        } => {
            let h = 1.0 / *grid_m as f64;
            for (k, &t) in kf.times.iter().enumerate() {
                let ts = fmt_f64(t);
                for i in 0..=*grid_m {
                    let x = i as f64 * h;
                    csv.push_str(&format!(
                        "{l},{ts},{},{},{},{}\n",
                        fmt_f64(x),
                        fmt_f64(std::f64::consts::PI * x),
                        fmt_f64(values[k][i]),
                        fmt_f64(measures[k][i])
                    ));
                }
            }
        }
        KernelData::TorusProduct { sides, cells, axes } => {
            for (k, &t) in kf.times.iter().enumerate() {
                let ts = fmt_f64(t);
                for (a, side) in sides.iter().enumerate() {
                    let h = side / *cells as f64;
                    for j in 0..*cells {
                        csv.push_str(&format!(
                            "{l},{ts},{},{},{},{}\n",
                            fmt_f64(a as f64),
                            fmt_f64(j as f64 * h),
                            fmt_f64(axes[a][k][j]),
                            fmt_f64(h)
                        ));
                    }
                }
            }
        }
    }
    fs::write(dir.join("kernel.csv"), csv)?;

    let (m, kind, source_dmu, sides) = match &kf.data {
        KernelData::Radial {
            grid_m,
            source_measures,
            ..
        } => (
            *grid_m,
            ProfileKind::WarpedSphere,
            source_measures.clone(),
            Vec::new(),
        ),
        KernelData::TorusProduct { sides, cells, .. } => (
            *cells,
            ProfileKind::FlatTorus,
            Vec::new(),
            sides.clone(),
        ),
    };
    let manifest = KernelManifest {
        source: KernelSource {
            x0: kf.source_x,
            direction: kf.direction,
        },
        l: kf.source_time,
        eps: kf.seed_eps,
        times: kf.times.clone(),
        solver: KernelSolver {
            dt: kf.seed_eps / 20.0,
            m,
            scheme: if kf.seed_eps == 0.0 {
                "closed_form".into()
            } else {
                "crank_nicolson_fv".into()
            },
        },
        n: kf.n,
        kind,
        source_dmu,
        sides,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(dir.join("kernel.json"), json + "\n")?;
    Ok(())
}

pub fn read_kernel_dir(dir: &Path) -> Result<KernelField, IoError> {
    let manifest: KernelManifest =
        serde_json::from_str(&fs::read_to_string(dir.join("kernel.json"))?)?;
    let csv_path = dir.join("kernel.csv");
    let text = fs::read_to_string(&csv_path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| malformed("kernel", &csv_path, "empty file"))?;
    if header != "l,t,x,theta_or_coord,u,dmu" {
        return Err(malformed(
            "kernel",
            &csv_path,
            format!("unknown header {header:?}"),
        ));
    }
    let rows: Vec<(f64, f64)> = {
        let mut out = Vec::new();
        for line in lines {
            let cols = split_row(line, 6, "kernel", &csv_path)?;
            out.push((
                parse_f64(cols[4], "kernel", &csv_path)?,
                parse_f64(cols[5], "kernel", &csv_path)?,
            ));
        }
        out
    };
    let num_times = manifest.times.len();
    let data = match manifest.kind {
        ProfileKind::WarpedSphere => {
            let per = manifest.solver.m + 1;
            if rows.len() != num_times * per {
                return Err(malformed(
                    "kernel",
                    &csv_path,
                    format!("expected {} rows, got {}", num_times * per, rows.len()),
                ));
            }
            let mut values = Vec::with_capacity(num_times);
            let mut measures = Vec::with_capacity(num_times);
            for k in 0..num_times {
                let slice = &rows[k * per..(k + 1) * per];
                values.push(slice.iter().map(|r| r.0).collect());
                measures.push(slice.iter().map(|r| r.1).collect());
            }
            KernelData::Radial {
                grid_m: manifest.solver.m,
                values,
                measures,
                source_measures: manifest.source_dmu.clone(),
            }
        }
        ProfileKind::FlatTorus => {
            let cells = manifest.solver.m;
            let n_axes = manifest.sides.len();
            if rows.len() != num_times * n_axes * cells {
                return Err(malformed(
                    "kernel",
                    &csv_path,
                    format!(
                        "expected {} rows, got {}",
                        num_times * n_axes * cells,
                        rows.len()
                    ),
                ));
            }
            let mut axes = vec![Vec::with_capacity(num_times); n_axes];
            for k in 0..num_times {
                for (a, axis) in axes.iter_mut().enumerate() {
                    let start = (k * n_axes + a) * cells;
                    axis.push(rows[start..start + cells].iter().map(|r| r.0).collect());
                }
            }
            KernelData::TorusProduct {
                sides: manifest.sides.clone(),
                cells,
                axes,
            }
        }
    };
    Ok(KernelField {
        n: manifest.n,
        direction: manifest.source.direction,
        source_x: manifest.source.x0,
        source_time: manifest.l,
        seed_eps: manifest.eps,
        times: manifest.times,
        data,
    })
}

pub fn write_entropy_csv(path: &Path, trace: &EntropyTrace) -> Result<(), IoError> {
    let mut out = String::from("s,W,residual,dW_numeric,f_min,f_max,f_var\n");
    for i in 0..trace.len() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_f64(trace.s_grid[i]),
            fmt_f64(trace.w_values[i]),
            fmt_f64(trace.residuals[i]),
            fmt_f64(trace.dw_numeric[i]),
            fmt_f64(trace.f_min[i]),
            fmt_f64(trace.f_max[i]),
            fmt_f64(trace.f_variance[i])
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_entropy_csv(path: &Path) -> Result<EntropyTrace, IoError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| malformed("entropy trace", path, "empty file"))?;
    if header != "s,W,residual,dW_numeric,f_min,f_max,f_var" {
        return Err(malformed(
            "entropy trace",
            path,
            format!("unknown header {header:?}"),
        ));
    }
    let mut trace = EntropyTrace {
        s_grid: Vec::new(),
        w_values: Vec::new(),
        residuals: Vec::new(),
        dw_numeric: Vec::new(),
        f_min: Vec::new(),
        f_max: Vec::new(),
        f_variance: Vec::new(),
    };
    for line in lines {
        let cols = split_row(line, 7, "entropy trace", path)?;
        trace.s_grid.push(parse_f64(cols[0], "entropy trace", path)?);
        trace
            .w_values
            .push(parse_f64(cols[1], "entropy trace", path)?);
        trace
            .residuals
            .push(parse_f64(cols[2], "entropy trace", path)?);
        trace
            .dw_numeric
            .push(parse_f64(cols[3], "entropy trace", path)?);
        trace.f_min.push(parse_f64(cols[4], "entropy trace", path)?);
        trace.f_max.push(parse_f64(cols[5], "entropy trace", path)?);
        trace
            .f_variance
            .push(parse_f64(cols[6], "entropy trace", path)?);
    }
    Ok(trace)
}

pub fn write_check_report_json(path: &Path, rep: &CheckReport) -> Result<(), IoError> {
    let json = serde_json::to_string_pretty(rep)?;
    fs::write(path, json + "\n")?;
    Ok(())
}

pub fn read_check_report_json(path: &Path) -> Result<CheckReport, IoError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn write_limit_report_json(path: &Path, rep: &LimitReport) -> Result<(), IoError> {
    let json = serde_json::to_string_pretty(rep)?;
    fs::write(path, json + "\n")?;
    Ok(())
}

pub fn read_limit_report_json(path: &Path) -> Result<LimitReport, IoError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Plot-ready numeric table with a caller-supplied header line.
pub fn write_samples_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<(), IoError> {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| fmt_f64(*x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::exact_sphere_trajectory;
    use crate::geometry::{make_flat_torus, make_round_sphere};
    use crate::kernel;
    use crate::soliton::Verdict;

    #[test]
    fn float_encoding_round_trips_exactly() {
        let samples = [
            0.0,
            -0.0,
            1.0 / 3.0,
            std::f64::consts::PI,
            1e300,
            1e-300,
            -2.2250738585072014e-308,
            0.004132231404959,
        ];
        for &x in &samples {
            let back: f64 = fmt_f64(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "round-trip broke {x:e}");
        }
    }

    #[test]
    fn profile_csv_round_trips_byte_identically() {
        let dir = tempfile::tempdir().unwrap();

        let p = make_round_sphere(3, 1.7, 32, 0.25).unwrap();
        let path = dir.path().join("sphere.csv");
        write_profile_csv(&path, &p).unwrap();
        let first = fs::read(&path).unwrap();
        let q = read_profile_csv(&path, 3, 32).unwrap();
        assert_eq!(q.a, p.a);
        assert_eq!(q.b, p.b);
        assert_eq!(q.time, p.time);
        write_profile_csv(&path, &q).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);

        let p = make_flat_torus(&[5.0, 7.5, 11.0], 16, -0.5).unwrap();
        let path = dir.path().join("torus.csv");
        write_profile_csv(&path, &p).unwrap();
        let first = fs::read(&path).unwrap();
        let q = read_profile_csv(&path, 3, 16).unwrap();
        assert_eq!(q.sides, p.sides);
        write_profile_csv(&path, &q).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn trajectory_dir_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let tr = exact_sphere_trajectory(2, 1.0, &[-1.0, -0.5, 0.0], 24).unwrap();
        write_trajectory_dir(dir.path(), &tr).unwrap();
        let back = read_trajectory_dir(dir.path()).unwrap();
        assert_eq!(back.t0, tr.t0);
        assert_eq!(back.exact, tr.exact);
        assert_eq!(back.profiles.len(), 3);
        assert_eq!(back.profiles[1].b, tr.profiles[1].b);

        let manifest_before = fs::read(dir.path().join("trajectory.json")).unwrap();
        write_trajectory_dir(dir.path(), &back).unwrap();
        assert_eq!(
            fs::read(dir.path().join("trajectory.json")).unwrap(),
            manifest_before
        );
    }

    #[test]
    fn kernel_dir_round_trips_both_layouts() {
        let dir = tempfile::tempdir().unwrap();

        let tr = exact_sphere_trajectory(2, 1.0, &[-2.0, 0.0], 24).unwrap();
        let kf = kernel::spectral_conjugate_field(&tr, 0.0, 0.0, &[-1.0, -2.0]).unwrap();
        let sub = dir.path().join("radial");
        write_kernel_dir(&sub, &kf).unwrap();
        let back = read_kernel_dir(&sub).unwrap();
        assert_eq!(back.times, kf.times);
        assert_eq!(back.direction, kf.direction);
        match (&back.data, &kf.data) {
            (
                KernelData::Radial {
                    values: v1,
                    measures: m1,
                    source_measures: s1,
                    ..
                },
                KernelData::Radial {
                    values: v2,
                    measures: m2,
                    source_measures: s2,
                    ..
                },
            ) => {
                assert_eq!(v1, v2);
                assert_eq!(m1, m2);
                assert_eq!(s1, s2);
            }
            _ => panic!("layout changed on read"),
        }
        let csv_before = fs::read(sub.join("kernel.csv")).unwrap();
        write_kernel_dir(&sub, &back).unwrap();
        assert_eq!(fs::read(sub.join("kernel.csv")).unwrap(), csv_before);

        let torus = crate::flow::exact_torus_trajectory(&[6.0, 9.0], &[-3.0, 0.5], 16).unwrap();
        let kf = kernel::exact_torus_kernel_field(
            &torus,
            0.0,
            &[-0.5, -1.5],
            KernelDirection::Conjugate,
        )
        .unwrap();
        let sub = dir.path().join("torus");
        write_kernel_dir(&sub, &kf).unwrap();
        let back = read_kernel_dir(&sub).unwrap();
        match (&back.data, &kf.data) {
            (
                KernelData::TorusProduct { axes: a1, sides: s1, .. },
                KernelData::TorusProduct { axes: a2, sides: s2, .. },
            ) => {
                assert_eq!(a1, a2);
                assert_eq!(s1, s2);
            }
            _ => panic!("layout changed on read"),
        }
    }

    #[test]
    fn entropy_trace_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let trace = EntropyTrace {
            s_grid: vec![1.0, 1.5, 2.0],
            w_values: vec![-0.3, -0.31, -0.3105],
            residuals: vec![-0.02, -0.01, -0.005],
            dw_numeric: vec![-0.02, -0.0105, -0.0049],
            f_min: vec![0.1, 0.2, 0.25],
            f_max: vec![1.0, 0.9, 0.8],
            f_variance: vec![0.02, 0.01, 0.007],
        };
        let path = dir.path().join("trace.csv");
        write_entropy_csv(&path, &trace).unwrap();
        let first = fs::read(&path).unwrap();
        let back = read_entropy_csv(&path).unwrap();
        assert_eq!(back.w_values, trace.w_values);
        assert_eq!(back.f_variance, trace.f_variance);
        write_entropy_csv(&path, &back).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn report_json_round_trips() {
        let dir = tempfile::tempdir().unwrap();

        let mut rep = CheckReport::new("demo");
        rep.observe(1.5);
        rep.observe(0.5);
        rep.set_constant("a1", 3.25);
        rep.observe_margin(0.125);
        rep.pass = true;
        rep.note("first");
        let path = dir.path().join("check.json");
        write_check_report_json(&path, &rep).unwrap();
        let back = read_check_report_json(&path).unwrap();
        assert_eq!(back.name, rep.name);
        assert_eq!(back.samples, rep.samples);
        assert_eq!(back.constant("a1"), Some(3.25));
        let first = fs::read(&path).unwrap();
        write_check_report_json(&path, &back).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);

        let lim = LimitReport {
            tau_list: vec![10.0, 100.0],
            residual_seq: vec![1e-3, 1e-5],
            w_seq: vec![[-0.3, -0.31], [-0.306, -0.3065]],
            f_variance_seq: vec![0.02, 3e-4],
            nonflat: true,
            verdict: Verdict::Pass,
            notes: vec![],
        };
        let path = dir.path().join("limit.json");
        write_limit_report_json(&path, &lim).unwrap();
        let back = read_limit_report_json(&path).unwrap();
        assert_eq!(back.verdict, Verdict::Pass);
        assert_eq!(back.w_seq, lim.w_seq);
        let text = fs::read_to_string(&path).unwrap();
        assert!(
            text.contains("\"W_seq\""),
            "limit JSON must use the W_seq key: {text}"
        );
    }
}
