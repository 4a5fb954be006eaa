use super::geometry::{is_strictly_monotone, simplex_lattice};
use super::{MomentRegion, Result, ToricError};
use crate::paths::{lcz_block_sum, BlockIndex, IndexResult};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Frame in which an index is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Hamiltonian,
    Reeb,
}

/// A closed orbit of the toric flow on `∂X_Ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub moment_point: Vec<f64>,
    /// Zero-based coordinates that do not vanish along the orbit.
    pub support: Vec<usize>,
    pub period: f64,
    /// `θ_j = T·∂_j f_Ω(x)`; off-support entries may be infinite and serialize as `null`.
    #[serde(serialize_with = "ser_extended", deserialize_with = "de_extended")]
    pub rotation_vector: Vec<f64>,
    /// Whether the orbit is one of a continuum (a torus of orbits or a degenerate circle).
    pub family: bool,
    pub index: IndexResult,
    pub frame: Frame,
}

fn ser_extended<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    v.iter().map(|x| x.is_finite().then_some(*x)).collect::<Vec<_>>().serialize(s)
}

fn de_extended<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    let v = Vec::<Option<f64>>::deserialize(d)?;
    Ok(v.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
}

/// Search resolution for [`enumerate_orbits`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitSearch {
    /// Lattice resolution along each edge of a two-dimensional face.
    pub grid: usize,
    /// Largest entry of a winding vector on faces of dimension at least one.
    pub max_winding: u64,
    /// Distance to an integer accepted as closing.
    pub rational_tol: f64,
}

impl Default for OrbitSearch {
    fn default() -> Self {
        Self { grid: 200, max_winding: 6, rational_tol: 1e-6 }
    }
}

/// Index of an orbit in both frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitIndex {
    pub hamiltonian: IndexResult,
    pub reeb: IndexResult,
}

fn near_integer(x: f64, tol: f64) -> Option<i64> {
    let r = x.round();
    (x.is_finite() && (x - r).abs() <= tol).then_some(r as i64)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Closed orbits with period at most `t_max`, sorted by period.
pub fn enumerate_orbits(region: &MomentRegion, t_max: f64, search: &OrbitSearch) -> Result<Vec<OrbitRecord>> {
    let mono = is_strictly_monotone(region, 2000);
    if !mono.monotone {
        return Err(ToricError::NotStrictlyMonotone { witness: mono.witness.unwrap_or_default() });
    }
    let n = region.n();
    let mut raw: Vec<(Vec<f64>, Vec<usize>, f64, Vec<f64>)> = Vec::new();
    for mask in 1u64..(1u64 << n) {
        let support: Vec<usize> = (0..n).filter(|j| (mask >> j) & 1 == 1).collect();
        if let Some(widths) = region.ellipsoid_widths() {
            ellipsoid_orbits(region, widths, &support, t_max, search, &mut raw)?;
        } else if support.len() == 1 {
            let j = support[0];
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let x = region.boundary_point(&e)?;
            let g = region.gradient(&x)?;
            push_multiples(x, &support, &g, 1.0 / g[j], t_max, &mut raw);
        } else {
            face_orbits(region, &support, t_max, search, &mut raw)?;
        }
    }
    raw.sort_by(|a, b| a.2.total_cmp(&b.2).then_with(|| a.1.cmp(&b.1)));
    let mut out = Vec::with_capacity(raw.len());
    for (moment_point, support, period, rotation_vector) in raw {
        let family = support.len() >= 2
            || (0..n).any(|j| {
                !support.contains(&j) && near_integer(rotation_vector[j], search.rational_tol).is_some()
            });
        let mut record = OrbitRecord {
            moment_point,
            support,
            period,
            rotation_vector,
            family,
            index: IndexResult::Exact { value: 0 },
            frame: Frame::Hamiltonian,
        };
        record.index = lcz_toric_orbit(&record, region)?.hamiltonian;
        out.push(record);
    }
    Ok(out)
}

fn push_multiples(
    x: Vec<f64>,
    support: &[usize],
    gradient: &[f64],
    base_period: f64,
    t_max: f64,
    raw: &mut Vec<(Vec<f64>, Vec<usize>, f64, Vec<f64>)>,
) {
    let mut k = 1.0;
    while k * base_period <= t_max * (1.0 + 1e-12) {
        let t = k * base_period;
        let theta = gradient.iter().map(|g| if g.is_finite() { t * g } else { f64::INFINITY }).collect();
        raw.push((x.clone(), support.to_vec(), t, theta));
        k += 1.0;
    }
}

fn ellipsoid_orbits(
    region: &MomentRegion,
    widths: &[f64],
    support: &[usize],
    t_max: f64,
    search: &OrbitSearch,
    raw: &mut Vec<(Vec<f64>, Vec<usize>, f64, Vec<f64>)>,
) -> Result<()> {
    let n = widths.len();
    let j0 = support[0];
    let mut u = vec![0.0; n];
    for &j in support {
        u[j] = 1.0 / support.len() as f64;
    }
    let x = region.boundary_point(&u)?;
    let mut k = 1.0;
    while k * widths[j0] <= t_max * (1.0 + 1e-12) {
        let t = k * widths[j0];
        let theta: Vec<f64> = widths.iter().map(|a| t / a).collect();
        if support.iter().all(|&j| near_integer(theta[j], search.rational_tol).is_some_and(|v| v > 0)) {
            raw.push((x.clone(), support.to_vec(), t, theta));
        }
        k += 1.0;
    }
    Ok(())
}

/// Orbits on the open face with support `S`: points where `∇_S f ∥ w` for primitive integer `w`.
fn face_orbits(
    region: &MomentRegion,
    support: &[usize],
    t_max: f64,
    search: &OrbitSearch,
    raw: &mut Vec<(Vec<f64>, Vec<usize>, f64, Vec<f64>)>,
) -> Result<()> {
    let n = region.n();
    let k = support.len();
    let res = match k {
        2 => search.grid,
        3 => (search.grid / 4).max(8),
        _ => (search.grid / 10).max(k + 2),
    };
    let embed = |w: &[f64]| {
        let mut u = vec![0.0; n];
        for (i, &j) in support.iter().enumerate() {
            u[j] = w[i];
        }
        u
    };
    let direction = |w: &[f64]| -> Result<Vec<f64>> {
        let g = region.gradient(&embed(w))?;
        let gs: Vec<f64> = support.iter().map(|&j| g[j]).collect();
        let total: f64 = gs.iter().sum();
        Ok(gs.iter().map(|v| v / total).collect())
    };
    let lattice = simplex_lattice(k, res, true);
    let dirs: Vec<Vec<f64>> = lattice.iter().map(|w| direction(w)).collect::<Result<_>>()?;

    let mut winding = vec![1u64; k];
    loop {
        if winding.iter().fold(0, |g, &v| gcd(g, v)) == 1 {
            let total = winding.iter().sum::<u64>() as f64;
            let target: Vec<f64> = winding.iter().map(|&v| v as f64 / total).collect();
            let dist = |d: &[f64]| d.iter().zip(&target).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let (best, best_dist) = dirs
                .iter()
                .enumerate()
                .map(|(i, d)| (i, dist(d)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("lattice is nonempty");
            match newton_direction(&direction, &lattice[best], &target)? {
                Some(w) => {
                    let x = region.boundary_point(&embed(&w))?;
                    let g = region.gradient(&x)?;
                    let gs: f64 = support.iter().map(|&j| g[j]).sum();
                    let period = total / gs;
                    let closes = support.iter().zip(&winding).all(|(&j, &wj)| {
                        (period * g[j] - wj as f64).abs() <= search.rational_tol
                    });
                    if !closes {
                        return Err(ToricError::ResolutionTooCoarse {
                            support: support.to_vec(),
                            winding: winding.clone(),
                        });
                    }
                    push_multiples(x, support, &g, period, t_max, raw);
                }
                None if best_dist < 2.0 / res as f64 => {
                    return Err(ToricError::ResolutionTooCoarse {
                        support: support.to_vec(),
                        winding: winding.clone(),
                    });
                }
                None => {}
            }
        }
        // Next winding vector in lexicographic order.
        let mut i = 0;
        while i < k && winding[i] == search.max_winding {
            winding[i] = 1;
            i += 1;
        }
        if i == k {
            break;
        }
        winding[i] += 1;
    }
    Ok(())
}

/// Damped Newton solve of `direction(w) = target` on the open face simplex.
fn newton_direction(
    direction: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    start: &[f64],
    target: &[f64],
) -> Result<Option<Vec<f64>>> {
    let k = start.len();
    let m = k - 1;
    let to_w = |y: &[f64]| {
        let mut w = y.to_vec();
        w.push(1.0 - y.iter().sum::<f64>());
        w
    };
    let residual = |y: &[f64]| -> Result<Option<Vec<f64>>> {
        let w = to_w(y);
        if w.iter().any(|v| *v <= 0.0) {
            return Ok(None);
        }
        let d = direction(&w)?;
        Ok(Some((0..m).map(|i| d[i] - target[i]).collect()))
    };
    let norm = |r: &[f64]| r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut y: Vec<f64> = start[..m].to_vec();
    let Some(mut r) = residual(&y)? else { return Ok(None) };
    for _ in 0..60 {
        if norm(&r) < 1e-13 {
            return Ok(Some(to_w(&y)));
        }
        let h: f64 = 1e-7;
        let mut jac = nalgebra::DMatrix::<f64>::zeros(m, m);
        for c in 0..m {
            let mut yp = y.clone();
            let mut ym = y.clone();
            let step = h.min(0.5 * y[c]).min(0.5 * (1.0 - y.iter().sum::<f64>()));
            yp[c] += step;
            ym[c] -= step;
            let (Some(rp), Some(rm)) = (residual(&yp)?, residual(&ym)?) else { return Ok(None) };
            for row in 0..m {
                jac[(row, c)] = (rp[row] - rm[row]) / (2.0 * step);
            }
        }
        let rhs = nalgebra::DVector::from_vec(r.iter().map(|v| -v).collect());
        let Some(delta) = jac.lu().solve(&rhs) else { return Ok(None) };
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda > 1e-6 {
            let trial: Vec<f64> = y.iter().zip(delta.iter()).map(|(a, d)| a + lambda * d).collect();
            if let Some(rt) = residual(&trial)? {
                if norm(&rt) < norm(&r) {
                    y = trial;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok((norm(&r) < 1e-10).then(|| to_w(&y)))
}

/// Conley-Zehnder index of a toric orbit from its split into rotation and unipotent blocks.
pub fn lcz_toric_orbit(record: &OrbitRecord, region: &MomentRegion) -> Result<OrbitIndex> {
    let n = region.n();
    if record.rotation_vector.len() != n || record.moment_point.len() != n {
        return Err(ToricError::InconsistentRecord("dimension mismatch".into()));
    }
    if record.support.is_empty() || record.support.iter().any(|&j| j >= n) || !(record.period > 0.0) {
        return Err(ToricError::InconsistentRecord("invalid support or period".into()));
    }
    let mut blocks = Vec::with_capacity(n + 1);
    for &j in &record.support {
        match near_integer(record.rotation_vector[j], 1e-6) {
            Some(k) if k > 0 => blocks.push(BlockIndex::Loop { k }),
            _ => {
                return Err(ToricError::InconsistentRecord(format!(
                    "θ_{j} = {} is not a positive integer",
                    record.rotation_vector[j]
                )))
            }
        }
    }
    let hess = region.hessian(&record.moment_point)?;
    let m = record.support.len();
    let vanishing = record.support.iter().all(|&a| {
        record.support.iter().all(|&b| {
            let h = hess[a * n + b];
            h.is_finite() && h.abs() < 1e-10
        })
    });
    if vanishing {
        blocks.extend(std::iter::repeat_n(BlockIndex::U1Rotation { theta: 0.0 }, m));
    } else {
        blocks.push(BlockIndex::UnipotentZeroRho { m });
    }
    for j in (0..n).filter(|j| !record.support.contains(j)) {
        let theta = record.rotation_vector[j];
        if theta.is_infinite() && theta > 0.0 {
            blocks.push(BlockIndex::U1Unbounded);
        } else {
            // Snap rounding noise so that integer rotations sit on the lower endpoint.
            let theta = near_integer(theta, 1e-9).map_or(theta, |v| v as f64);
            blocks.push(BlockIndex::U1Rotation { theta });
        }
    }
    let hamiltonian = lcz_block_sum(&blocks);
    Ok(OrbitIndex { hamiltonian, reeb: hamiltonian.shifted(1) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ellipsoid_one_two_indices() {
        let e = MomentRegion::ellipsoid(vec![1.0, 2.0]).unwrap();
        let orbits = enumerate_orbits(&e, 2.0, &OrbitSearch::default()).unwrap();
        let gamma1 = orbits.iter().find(|o| o.support == vec![0] && o.period == 1.0).unwrap();
        assert_eq!(gamma1.rotation_vector, vec![1.0, 0.5]);
        assert!(!gamma1.family);
        let idx = lcz_toric_orbit(gamma1, &e).unwrap();
        assert_eq!(idx.hamiltonian, IndexResult::Exact { value: 2 });
        assert_eq!(idx.reeb, IndexResult::Exact { value: 3 });
        let gamma2 = orbits.iter().find(|o| o.support == vec![1] && o.period == 2.0).unwrap();
        assert_eq!(gamma2.index, IndexResult::Exact { value: 4 });
    }

    #[test]
    fn irrational_ellipsoid_has_only_axis_orbits() {
        let e = MomentRegion::ellipsoid(vec![1.0, 2f64.sqrt()]).unwrap();
        let orbits = enumerate_orbits(&e, 5.0, &OrbitSearch::default()).unwrap();
        assert!(orbits.iter().all(|o| o.support.len() == 1 && !o.family));
        let periods: Vec<f64> = orbits.iter().map(|o| o.period).collect();
        let expected = [1.0, 2f64.sqrt(), 2.0, 2.0 * 2f64.sqrt(), 3.0, 4.0, 3.0 * 2f64.sqrt(), 5.0];
        assert_eq!(periods.len(), expected.len());
        for (p, q) in periods.iter().zip(expected) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn round_ellipsoid_is_a_family() {
        let e = MomentRegion::ellipsoid(vec![1.0, 1.0]).unwrap();
        let orbits = enumerate_orbits(&e, 1.0, &OrbitSearch::default()).unwrap();
        assert!(orbits.iter().all(|o| o.family && o.period == 1.0));
        assert!(orbits.iter().any(|o| o.support == vec![0, 1]));
    }

    #[test]
    fn p_half_torus_orbits() {
        let r = MomentRegion::pfamily(vec![1.0, 1.0], 0.5).unwrap();
        let orbits = enumerate_orbits(&r, 6.0, &OrbitSearch::default()).unwrap();
        let torus: Vec<_> = orbits.iter().filter(|o| o.support.len() == 2).collect();
        assert!(!torus.is_empty());
        for o in &torus {
            assert!(o.family);
            let g = r.gradient(&o.moment_point).unwrap();
            for j in 0..2 {
                let theta = o.period * g[j];
                assert!((theta - theta.round()).abs() < 1e-6);
            }
            assert!((r.value(&o.moment_point).unwrap() - 1.0).abs() < 1e-12);
            assert!(o.index.lower_bound() >= 2);
        }
        // The symmetric winding (1, 1) sits on the diagonal with period 2.
        let diag = torus.iter().find(|o| (o.period - 2.0).abs() < 1e-9).unwrap();
        assert!((diag.moment_point[0] - 0.25).abs() < 1e-9);
    }

    #[test]
    fn record_json_round_trip() {
        let r = MomentRegion::pfamily(vec![1.0, 2.0], 0.5).unwrap();
        let orbits = enumerate_orbits(&r, 2.0, &OrbitSearch::default()).unwrap();
        let axis = orbits.iter().find(|o| o.support == vec![0]).unwrap();
        assert!(axis.rotation_vector[1].is_infinite());
        let json = serde_json::to_string(axis).unwrap();
        assert!(json.contains("null"));
        let back: OrbitRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(&back, axis);
    }

    #[test]
    fn inconsistent_record_is_rejected() {
        let e = MomentRegion::ellipsoid(vec![1.0, 2.0]).unwrap();
        let bad = OrbitRecord {
            moment_point: vec![1.0, 0.0],
            support: vec![0],
            period: 1.5,
            rotation_vector: vec![1.5, 0.75],
            family: false,
            index: IndexResult::Exact { value: 0 },
            frame: Frame::Hamiltonian,
        };
        assert!(matches!(lcz_toric_orbit(&bad, &e), Err(ToricError::InconsistentRecord(_))));
    }
}
