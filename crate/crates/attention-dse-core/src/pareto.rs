//! Dominance, Pareto-set maintenance, hypervolume, and ADRS.
//!
//! All predicates canonicalize to minimization internally (maximized
//! objectives are negated); orientation metadata lives at the API surface.
//! Hypervolume is exact: a sweep in 2-D and recursive exclusive volumes in
//! 3-D and above, with an independent Monte-Carlo estimator for
//! cross-checking. ADRS follows the standard average-distance-to-reference-set
//! definition (the paper plots it without defining it): the mean, over true
//! front members, of the distance to the nearest found member in
//! per-objective range-normalized space.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Optimization sense of one objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

/// Orientation of the artifact's (IPC, Power, Area) objectives.
pub const PPA_ORIENTATION: [Direction; 3] =
    [Direction::Maximize, Direction::Minimize, Direction::Minimize];

/// Tolerance under which two objective vectors are considered equal (duplicate
/// collapsing in fronts).
pub const OBJECTIVE_EQ_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ParetoError {
    #[error("objective dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("front member {0} does not dominate the reference point")]
    MemberOutsideReference(usize),
    #[error("truth front is empty")]
    EmptyTruth,
}

/// Map raw objectives into canonical minimization space.
pub fn canonicalize(values: &[f64], orientation: &[Direction]) -> Vec<f64> {
    assert_eq!(values.len(), orientation.len(), "orientation length mismatch");
    values
        .iter()
        .zip(orientation)
        .map(|(&v, d)| match d {
            Direction::Minimize => v,
            Direction::Maximize => -v,
        })
        .collect()
}

/// True iff `a` dominates `b`: weakly better everywhere, strictly better
/// somewhere (after orientation normalization).
pub fn dominates(a: &[f64], b: &[f64], orientation: &[Direction]) -> Result<bool, ParetoError> {
    if a.len() != b.len() {
        return Err(ParetoError::DimensionMismatch(a.len(), b.len()));
    }
    if a.len() != orientation.len() {
        return Err(ParetoError::DimensionMismatch(a.len(), orientation.len()));
    }
    let ca = canonicalize(a, orientation);
    let cb = canonicalize(b, orientation);
    let mut strictly = false;
    for (x, y) in ca.iter().zip(&cb) {
        if x > y {
            return Ok(false);
        }
        if x < y {
            strictly = true;
        }
    }
    Ok(strictly)
}

fn approx_eq(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= OBJECTIVE_EQ_TOL)
}

/// A mutually non-dominated archive. `T` is whatever payload identifies a
/// member (usually a design point).
#[derive(Clone, Debug)]
pub struct ParetoSet<T> {
    orientation: Vec<Direction>,
    members: Vec<(T, Vec<f64>)>,
}

impl<T> ParetoSet<T> {
    pub fn new(orientation: &[Direction]) -> Self {
        ParetoSet {
            orientation: orientation.to_vec(),
            members: Vec::new(),
        }
    }

    pub fn orientation(&self) -> &[Direction] {
        &self.orientation
    }

    pub fn members(&self) -> &[(T, Vec<f64>)] {
        &self.members
    }

    pub fn objectives(&self) -> Vec<Vec<f64>> {
        self.members.iter().map(|(_, o)| o.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Insert a candidate, evicting members it dominates. Returns true when
    /// the candidate joined the front (i.e. it was not dominated and not a
    /// duplicate).
    pub fn insert(&mut self, item: T, objectives: Vec<f64>) -> bool {
        assert_eq!(objectives.len(), self.orientation.len());
        for (_, o) in &self.members {
            if approx_eq(o, &objectives) {
                return false;
            }
            if dominates(o, &objectives, &self.orientation).unwrap() {
                return false;
            }
        }
        self.members
            .retain(|(_, o)| !dominates(&objectives, o, &self.orientation).unwrap());
        self.members.push((item, objectives));
        true
    }
}

/// Non-dominated subset of a batch of points. Order-independent result:
/// members come out in first-occurrence order of the surviving points.
pub fn pareto_filter<T: Clone>(
    points: &[(T, Vec<f64>)],
    orientation: &[Direction],
) -> ParetoSet<T> {
    let mut set = ParetoSet::new(orientation);
    for (item, obj) in points {
        set.insert(item.clone(), obj.clone());
    }
    set
}

/// Per-objective bound that every front member must dominate; raw (oriented)
/// values, like the objectives themselves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub values: Vec<f64>,
}

/// Default reference rule: per-objective worst observed value pushed 10%
/// further out (measured against the observed range, or the magnitude when
/// the range collapses), frozen per experiment so PHV curves are comparable.
pub fn default_reference(points: &[Vec<f64>], orientation: &[Direction]) -> ReferencePoint {
    assert!(!points.is_empty(), "need at least one observation");
    let dim = orientation.len();
    let mut values = Vec::with_capacity(dim);
    for j in 0..dim {
        let canon: Vec<f64> = points
            .iter()
            .map(|p| canonicalize(p, orientation)[j])
            .collect();
        let worst = canon.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let best = canon.iter().cloned().fold(f64::INFINITY, f64::min);
        let margin = (worst - best).max(0.1 * worst.abs()).max(1e-6);
        let c = worst + 0.1 * margin;
        values.push(match orientation[j] {
            Direction::Minimize => c,
            Direction::Maximize => -c,
        });
    }
    ReferencePoint { values }
}

/// Exact Pareto hypervolume of the region dominated by the front and bounded
/// by `reference`. 2-D uses a sweep; higher dimensions use recursive
/// exclusive volumes. Errors if any member fails to dominate the reference.
pub fn hypervolume<T>(
    set: &ParetoSet<T>,
    reference: &ReferencePoint,
) -> Result<f64, ParetoError> {
    if reference.values.len() != set.orientation.len() {
        return Err(ParetoError::DimensionMismatch(
            reference.values.len(),
            set.orientation.len(),
        ));
    }
    if set.members.is_empty() {
        return Ok(0.0);
    }
    let cref = canonicalize(&reference.values, &set.orientation);
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(set.members.len());
    for (i, (_, o)) in set.members.iter().enumerate() {
        let c = canonicalize(o, &set.orientation);
        if c.iter().zip(&cref).any(|(p, r)| p > r) {
            return Err(ParetoError::MemberOutsideReference(i));
        }
        pts.push(c);
    }
    Ok(match cref.len() {
        1 => {
            let best = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            cref[0] - best
        }
        2 => hypervolume_2d(&mut pts, &cref),
        _ => hypervolume_recursive(&pts, &cref),
    })
}

fn hypervolume_2d(pts: &mut [Vec<f64>], cref: &[f64]) -> f64 {
    pts.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
    let mut hv = 0.0;
    let mut prev_y = cref[1];
    for p in pts.iter() {
        if p[1] < prev_y {
            hv += (cref[0] - p[0]) * (prev_y - p[1]);
            prev_y = p[1];
        }
    }
    hv
}

/// Exclusive-volume recursion (minimization): sort by the first coordinate;
/// each point contributes its box to the reference minus the volume covered
/// by the boxes of later points clipped into it.
fn hypervolume_recursive(pts: &[Vec<f64>], cref: &[f64]) -> f64 {
    let mut pts: Vec<Vec<f64>> = pts.to_vec();
    pts.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
    pts_hv(&pts, cref)
}

fn box_volume(p: &[f64], cref: &[f64]) -> f64 {
    p.iter().zip(cref).map(|(x, r)| r - x).product()
}

fn pts_hv(pts: &[Vec<f64>], cref: &[f64]) -> f64 {
    match pts.len() {
        0 => 0.0,
        1 => box_volume(&pts[0], cref),
        _ => {
            let mut hv = 0.0;
            for (i, p) in pts.iter().enumerate() {
                // Clip all later points into p's box.
                let mut limited: Vec<Vec<f64>> = pts[i + 1..]
                    .iter()
                    .map(|q| q.iter().zip(p).map(|(a, b)| a.max(*b)).collect())
                    .collect();
                // Drop dominated clipped points; they add nothing.
                limited = filter_min_nondominated(limited);
                hv += box_volume(p, cref) - pts_hv(&limited, cref);
            }
            hv
        }
    }
}

fn filter_min_nondominated(pts: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    'outer: for p in pts {
        let mut i = 0;
        while i < out.len() {
            if weakly_dominates_min(&out[i], &p) {
                continue 'outer;
            }
            if weakly_dominates_min(&p, &out[i]) {
                out.swap_remove(i);
            } else {
                i += 1;
            }
        }
        out.push(p);
    }
    out
}

fn weakly_dominates_min(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

/// Monte-Carlo hypervolume estimate with its standard error. Samples
/// uniformly in the box spanned by the front's ideal corner and the
/// reference point.
pub fn hypervolume_monte_carlo<T>(
    set: &ParetoSet<T>,
    reference: &ReferencePoint,
    samples: u64,
    seed: u64,
) -> Result<(f64, f64), ParetoError> {
    use rand::Rng;
    use rand::SeedableRng;
    if set.members.is_empty() {
        return Ok((0.0, 0.0));
    }
    let cref = canonicalize(&reference.values, &set.orientation);
    let pts: Vec<Vec<f64>> = set
        .members
        .iter()
        .map(|(_, o)| canonicalize(o, &set.orientation))
        .collect();
    let dim = cref.len();
    let mut lo = vec![f64::INFINITY; dim];
    for p in &pts {
        for j in 0..dim {
            lo[j] = lo[j].min(p[j]);
        }
    }
    let vol: f64 = lo.iter().zip(&cref).map(|(l, r)| r - l).product();
    if vol <= 0.0 {
        return Ok((0.0, 0.0));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    let mut x = vec![0.0f64; dim];
    for _ in 0..samples {
        for j in 0..dim {
            x[j] = rng.gen_range(lo[j]..cref[j]);
        }
        if pts.iter().any(|p| weakly_dominates_min(p, &x)) {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    let se = vol * (p * (1.0 - p) / samples as f64).sqrt();
    Ok((vol * p, se))
}

/// Average distance from each truth member to the nearest found member, in
/// range-normalized canonical space (ranges from the truth front; a collapsed
/// range falls back to raw distance in that coordinate). Zero when the found
/// front covers the truth.
pub fn adrs<T, U>(found: &ParetoSet<T>, truth: &ParetoSet<U>) -> Result<f64, ParetoError> {
    if truth.is_empty() {
        return Err(ParetoError::EmptyTruth);
    }
    if found.orientation != truth.orientation {
        return Err(ParetoError::DimensionMismatch(
            found.orientation.len(),
            truth.orientation.len(),
        ));
    }
    let dim = truth.orientation.len();
    let tpts: Vec<Vec<f64>> = truth
        .members
        .iter()
        .map(|(_, o)| canonicalize(o, &truth.orientation))
        .collect();
    let fpts: Vec<Vec<f64>> = found
        .members
        .iter()
        .map(|(_, o)| canonicalize(o, &found.orientation))
        .collect();
    let mut scale = vec![1.0f64; dim];
    for j in 0..dim {
        let hi = tpts.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max);
        let lo = tpts.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min);
        if hi - lo > 0.0 {
            scale[j] = hi - lo;
        }
    }
    if fpts.is_empty() {
        return Ok(f64::INFINITY);
    }
    let mut total = 0.0;
    for t in &tpts {
        let nearest = fpts
            .iter()
            .map(|f| {
                t.iter()
                    .zip(f)
                    .zip(&scale)
                    .map(|((a, b), s)| ((a - b) / s).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        total += nearest;
    }
    Ok(total / tpts.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const MIN2: [Direction; 2] = [Direction::Minimize, Direction::Minimize];
    const MIN3: [Direction; 3] =
        [Direction::Minimize, Direction::Minimize, Direction::Minimize];

    /// Independent O(n^2) brute-force filter used as the oracle for
    /// pareto_filter. Deliberately avoids ParetoSet.
    fn brute_force_front(points: &[Vec<f64>], orientation: &[Direction]) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        'outer: for (i, p) in points.iter().enumerate() {
            for (j, q) in points.iter().enumerate() {
                if i != j && dominates(q, p, orientation).unwrap() {
                    continue 'outer;
                }
                // collapse duplicates: keep first occurrence only
                if j < i && p.iter().zip(q).all(|(a, b)| (a - b).abs() <= OBJECTIVE_EQ_TOL) {
                    continue 'outer;
                }
            }
            out.push(p.clone());
        }
        out
    }

    fn sorted(mut v: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn dominance_examples() {
        assert!(!dominates(&[1.0, 1.0], &[1.0, 1.0], &MIN2).unwrap());
        assert!(dominates(&[1.0, 1.0], &[2.0, 2.0], &MIN2).unwrap());
        assert!(!dominates(&[1.0, 3.0], &[3.0, 1.0], &MIN2).unwrap());
        assert!(!dominates(&[3.0, 1.0], &[1.0, 3.0], &MIN2).unwrap());
        assert!(matches!(
            dominates(&[1.0], &[1.0, 2.0], &MIN2),
            Err(ParetoError::DimensionMismatch(..))
        ));
        // orientation-aware: higher IPC dominates under Maximize
        let orient = [Direction::Maximize, Direction::Minimize];
        assert!(dominates(&[2.0, 1.0], &[1.0, 1.0], &orient).unwrap());
    }

    #[test]
    fn filter_examples() {
        // all identical -> one member
        let pts: Vec<((), Vec<f64>)> = (0..5).map(|_| ((), vec![1.0, 2.0])).collect();
        assert_eq!(pareto_filter(&pts, &MIN2).len(), 1);
        // chain p1 < p2 < p3 -> {p1}
        let pts = vec![
            ((), vec![3.0, 3.0]),
            ((), vec![2.0, 2.0]),
            ((), vec![1.0, 1.0]),
        ];
        let f = pareto_filter(&pts, &MIN2);
        assert_eq!(f.objectives(), vec![vec![1.0, 1.0]]);
    }

    #[test]
    fn filter_matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..200 {
            let dim = if case % 2 == 0 { 2 } else { 3 };
            let orientation = &[Direction::Minimize; 3][..dim];
            let n = rng.gen_range(1..60);
            let pts: Vec<((), Vec<f64>)> = (0..n)
                .map(|_| ((), (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect()))
                .collect();
            let raw: Vec<Vec<f64>> = pts.iter().map(|(_, o)| o.clone()).collect();
            let got = sorted(pareto_filter(&pts, orientation).objectives());
            let want = sorted(brute_force_front(&raw, orientation));
            assert_eq!(got, want);
        }
    }

    #[test]
    fn hypervolume_fixtures() {
        let r = ReferencePoint { values: vec![1.0, 1.0] };
        let empty: ParetoSet<()> = ParetoSet::new(&MIN2);
        assert_eq!(hypervolume(&empty, &r).unwrap(), 0.0);

        let mut s = ParetoSet::new(&MIN2);
        s.insert((), vec![0.0, 0.0]);
        assert_abs_diff_eq!(hypervolume(&s, &r).unwrap(), 1.0, epsilon = 1e-12);

        let mut s = ParetoSet::new(&MIN2);
        s.insert((), vec![0.0, 0.5]);
        s.insert((), vec![0.5, 0.0]);
        assert_abs_diff_eq!(hypervolume(&s, &r).unwrap(), 0.75, epsilon = 1e-12);

        // member outside reference errors
        let mut s = ParetoSet::new(&MIN2);
        s.insert((), vec![2.0, 0.0]);
        assert!(matches!(
            hypervolume(&s, &r),
            Err(ParetoError::MemberOutsideReference(_))
        ));
    }

    #[test]
    fn hypervolume_3d_hand_fixture() {
        // Two boxes from (0,0,0)-ish corners: {(0,.5,.5), (.5,0,0)} vs ref (1,1,1):
        // vol A = 1*.5*.5 = .25, vol B = .5*1*1 = .5,
        // intersection corner max(A,B) = (.5,.5,.5) -> vol .125
        // union = .25 + .5 - .125 = .625
        let r = ReferencePoint { values: vec![1.0, 1.0, 1.0] };
        let mut s = ParetoSet::new(&MIN3);
        s.insert((), vec![0.0, 0.5, 0.5]);
        s.insert((), vec![0.5, 0.0, 0.0]);
        assert_abs_diff_eq!(hypervolume(&s, &r).unwrap(), 0.625, epsilon = 1e-12);
    }

    #[test]
    fn exact_3d_agrees_with_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..20 {
            let pts: Vec<((), Vec<f64>)> = (0..30)
                .map(|_| ((), (0..3).map(|_| rng.gen_range(0.0..1.0)).collect()))
                .collect();
            let front = pareto_filter(&pts, &MIN3);
            let r = ReferencePoint { values: vec![1.1, 1.1, 1.1] };
            let exact = hypervolume(&front, &r).unwrap();
            let (mc, se) = hypervolume_monte_carlo(&front, &r, 200_000, case).unwrap();
            assert!(
                (exact - mc).abs() <= 3.0 * se.max(1e-9),
                "exact {exact} vs mc {mc} (se {se})"
            );
        }
    }

    #[test]
    fn adrs_examples() {
        let mut truth = ParetoSet::new(&MIN2);
        truth.insert((), vec![0.0, 0.0]);
        let mut found = ParetoSet::new(&MIN2);
        found.insert((), vec![0.0, 0.0]);
        assert_eq!(adrs(&found, &truth).unwrap(), 0.0);

        let mut found = ParetoSet::new(&MIN2);
        found.insert((), vec![1.0, 1.0]);
        // single truth point: ranges collapse, raw distance sqrt(2)
        assert_abs_diff_eq!(adrs(&found, &truth).unwrap(), 2.0f64.sqrt(), epsilon = 1e-12);

        let empty: ParetoSet<()> = ParetoSet::new(&MIN2);
        assert!(matches!(adrs(&found, &empty), Err(ParetoError::EmptyTruth)));
    }

    #[test]
    fn adrs_matches_brute_force_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let truth_pts: Vec<((), Vec<f64>)> = (0..40)
            .map(|_| ((), vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]))
            .collect();
        let found_pts: Vec<((), Vec<f64>)> = (0..40)
            .map(|_| ((), vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]))
            .collect();
        let truth = pareto_filter(&truth_pts, &MIN2);
        let found = pareto_filter(&found_pts, &MIN2);
        let got = adrs(&found, &truth).unwrap();

        // independent recomputation
        let t = truth.objectives();
        let f = found.objectives();
        let mut scale = [1.0f64; 2];
        for j in 0..2 {
            let hi = t.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max);
            let lo = t.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min);
            if hi - lo > 0.0 {
                scale[j] = hi - lo;
            }
        }
        let mut total = 0.0;
        for tp in &t {
            let mut best = f64::INFINITY;
            for fp in &f {
                let d = (((tp[0] - fp[0]) / scale[0]).powi(2)
                    + ((tp[1] - fp[1]) / scale[1]).powi(2))
                .sqrt();
                best = best.min(d);
            }
            total += best;
        }
        assert!((got - total / t.len() as f64).abs() < 1e-12);
    }

    proptest! {
        /// Inserting a non-dominated point strictly increases PHV; inserting a
        /// dominated point leaves it unchanged.
        #[test]
        fn phv_expansion_semantics(
            seed in 0u64..500,
            n in 2usize..20,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<((), Vec<f64>)> = (0..n)
                .map(|_| ((), vec![rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9)]))
                .collect();
            let mut front = pareto_filter(&pts, &MIN2);
            let r = ReferencePoint { values: vec![1.0, 1.0] };
            let before = hypervolume(&front, &r).unwrap();

            // A point dominated by an existing member: PHV unchanged.
            let (_, base) = front.members()[0].clone();
            let dominated = vec![(base[0] + 0.05).min(0.99), (base[1] + 0.05).min(0.99)];
            let grew = front.insert((), dominated);
            prop_assert!(!grew || hypervolume(&front, &r).unwrap() >= before);
            let after_dominated = hypervolume(&front, &r).unwrap();
            prop_assert!((after_dominated - before).abs() < 1e-12 || grew);

            // A point expanding the front strictly increases PHV.
            let best0 = front.members().iter().map(|(_, o)| o[0]).fold(f64::INFINITY, f64::min);
            let expanding = vec![best0 - 0.05, 0.95];
            if expanding[0] > 0.0 && front.insert((), expanding) {
                let after = hypervolume(&front, &r).unwrap();
                prop_assert!(after > after_dominated);
            }
        }

        /// filter(filter(S)) == filter(S), and PHV is invariant under member
        /// permutation.
        #[test]
        fn idempotence_and_permutation_invariance(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<(usize, Vec<f64>)> = (0..25)
                .map(|i| (i, vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]))
                .collect();
            let f1 = pareto_filter(&pts, &MIN3);
            let f2 = pareto_filter(f1.members(), &MIN3);
            prop_assert_eq!(sorted(f1.objectives()), sorted(f2.objectives()));

            let r = ReferencePoint { values: vec![1.1, 1.1, 1.1] };
            let hv = hypervolume(&f1, &r).unwrap();
            let mut rev: Vec<(usize, Vec<f64>)> = f1.members().to_vec();
            rev.reverse();
            let f3 = pareto_filter(&rev, &MIN3);
            prop_assert!((hypervolume(&f3, &r).unwrap() - hv).abs() < 1e-9);
        }
    }
}
