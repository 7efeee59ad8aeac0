//! Whole-suite checks shared by the acceptance runner and the regular
//! integration tests. Each returns a short summary or the first failure.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use triangle_inflation::certificate::{verify, Certificate, Verdict};
use triangle_inflation::constraints::{expand_constraint_orbits, CanonicalConstraint};
use triangle_inflation::events::Event;
use triangle_inflation::perm::Perm;
use triangle_inflation::problem::ReducedProblem;
use triangle_inflation::qp::{dot, max_gap, norm, ActiveSet};
use triangle_inflation::solver::{solve, SolveStatus, SolverConfig};
use triangle_inflation::symmetry::{party_perm_apply, InflationSymmetry, SourcePermutation, SymmetryGroup};
use triangle_inflation::target::{Family, RationalDistribution};

use super::*;

pub type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// All admissible `(σ, π, τ)` for (2,2,2) with the given number of outcomes.
pub fn full_group_elements(nouts: usize) -> Vec<InflationSymmetry> {
    let size = graph222().size();
    let mut out = Vec::new();
    for source in SourcePermutation::all(&size) {
        for party in Perm::all(3) {
            for outcome in Perm::all(nouts) {
                out.push(InflationSymmetry { source, party, outcome });
            }
        }
    }
    out
}

pub fn source_party_commutation() -> Check {
    let g = graph222();
    let size = g.size();
    let mut checked = 0;
    for pi in Perm::all(3) {
        for sigma in SourcePermutation::all(&size) {
            for p in g.parties() {
                let lhs = party_perm_apply(&pi, &sigma.apply_to_party(p));
                let rhs = sigma.shuffled_by(&pi).apply_to_party(&party_perm_apply(&pi, p));
                ensure(lhs == rhs, || format!("π={pi:?} σ={sigma:?} P={p}: {lhs} vs {rhs}"))?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} (π, σ, P) triples"))
}

pub fn outcome_commutation() -> Check {
    let g = graph222();
    let size = g.size();
    let id = InflationSymmetry::identity(&size, 2);
    let taus: Vec<InflationSymmetry> = Perm::all(2).into_iter().map(|outcome| InflationSymmetry { outcome, ..id }).collect();
    let others: Vec<InflationSymmetry> = SourcePermutation::all(&size)
        .into_iter()
        .map(|source| InflationSymmetry { source, ..id })
        .chain(Perm::all(3).into_iter().map(|party| InflationSymmetry { party, ..id }))
        .collect();
    let mut checked = 0;
    for e in 0..4096u64 {
        let event = Event::decode(g.parties(), e, 2).unwrap();
        for t in &taus {
            for o in &others {
                let a = t.apply_to_event(&size, &o.apply_to_event(&size, &event).unwrap()).unwrap();
                let b = o.apply_to_event(&size, &t.apply_to_event(&size, &event).unwrap()).unwrap();
                ensure(a == b, || format!("τ and {o:?} do not commute on {event}"))?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} event checks"))
}

pub fn associativity(samples: usize, seed: u64) -> Check {
    let g = graph222();
    let size = g.size();
    let elements = full_group_elements(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = InflationSymmetry::identity(&size, 2);
    for _ in 0..samples {
        let [a, b, c] = [0; 3].map(|_| elements[rng.gen_range(0..elements.len())]);
        let left = a.compose(&b).unwrap().compose(&c).unwrap();
        let right = a.compose(&b.compose(&c).unwrap()).unwrap();
        ensure(left == right, || format!("({a:?}{b:?}){c:?} differs"))?;
        ensure(a.compose(&a.inverse()).unwrap() == id, || format!("{a:?} · {a:?}⁻¹ is not the identity"))?;
        let e = Event::decode(g.parties(), rng.gen_range(0..4096), 2).unwrap();
        let seq = a.apply_to_event(&size, &b.apply_to_event(&size, &e).unwrap()).unwrap();
        ensure(a.compose(&b).unwrap().apply_to_event(&size, &e).unwrap() == seq, || {
            format!("action of {a:?}·{b:?} is not sequential")
        })?;
    }
    Ok(format!("{samples} random triples"))
}

pub fn orbit_sum_identity(samples: usize, seed: u64) -> Check {
    let g = graph222();
    let group = SymmetryGroup::distribution_group(&g, &RationalDistribution::srb_family(1, 3).unwrap()).unwrap();
    let images = image_table(&g, &group);
    let inverse_images: Vec<Vec<usize>> = group
        .elements()
        .iter()
        .map(|x| (0..4096).map(|e| event_image(&g, &x.inverse(), 2, e)).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let f: Vec<Q> = (0..4096).map(|_| random_rational(&mut rng)).collect();
        let x = rng.gen_range(0..4096);
        let lhs = inverse_images.iter().map(|t| f[t[x]].clone()).sum::<Q>() / Q::from_integer(BigInt::from(group.order()));
        let mut orbit: Vec<usize> = images.iter().map(|t| t[x]).collect();
        orbit.sort_unstable();
        orbit.dedup();
        let rhs = orbit.iter().map(|&y| f[y].clone()).sum::<Q>() / Q::from_integer(BigInt::from(orbit.len()));
        ensure(lhs == rhs, || format!("orbit sum mismatch at event {x}"))?;
    }
    Ok(format!("{samples} random (F, x) pairs"))
}

pub fn twirl_properties(samples: usize, seed: u64) -> Check {
    let g = graph222();
    let group = SymmetryGroup::distribution_group(&g, &RationalDistribution::srb_family(2, 5).unwrap()).unwrap();
    let images = image_table(&g, &group);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        // a random distribution with sparse support
        let mut v = vec![Q::zero(); 4096];
        let mut total = Q::zero();
        for _ in 0..10 {
            let w = q(rng.gen_range(1..10), 1);
            total += &w;
            v[rng.gen_range(0..4096)] += w;
        }
        let v: Vec<Q> = v.into_iter().map(|x| x / &total).collect();
        let t = twirl(&images, &v);
        ensure(twirl(&images, &t) == t, || "twirl is not idempotent".into())?;
        ensure(t.iter().all(|x| !x.is_negative()) && t.iter().sum::<Q>() == Q::one(), || {
            "twirl of a distribution is not a distribution".into()
        })?;
        let h = rng.gen_range(0..images.len());
        let mut moved = vec![Q::zero(); 4096];
        for (e, x) in t.iter().enumerate() {
            moved[images[h][e]] = x.clone();
        }
        ensure(moved == t, || "twirled vector is not invariant".into())?;
    }
    Ok(format!("{samples} random distributions"))
}

/// `R∘R† = id` and `R†∘R = H_c` twirl for the c0 and c1 blocks of SRB.
pub fn reduction_duality(samples: usize, seed: u64) -> Check {
    let g = graph222();
    let p = RationalDistribution::srb_family(1, 4).unwrap();
    let gp = SymmetryGroup::distribution_group(&g, &p).unwrap();
    let specs = [spec("c0", C0, &g), spec("c1", C1, &g)];
    let orbits = expand_constraint_orbits(&specs, &g, &gp).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for orbit in &orbits {
        let scope = orbit.representative.scope();
        let labels = marginal_orbits(&g, &orbit.stabilizer, &scope);
        let n = labels.len();
        // H_c twirl on marginal vectors, from explicit images
        let size = g.size();
        let images: Vec<Vec<usize>> = orbit
            .stabilizer
            .elements()
            .iter()
            .map(|h| {
                (0..n)
                    .map(|m| {
                        let d = digits(m, 2, scope.len());
                        let mut out = vec![0; scope.len()];
                        for (i, &party) in scope.iter().enumerate() {
                            let image = h.apply_to_party(&size, &g.party(party)).unwrap();
                            out[scope.binary_search(&g.index_of(&image).unwrap()).unwrap()] = h.outcome.apply(d[i]);
                        }
                        index(&out, 2)
                    })
                    .collect()
            })
            .collect();
        for _ in 0..samples / orbits.len() {
            let v: Vec<Q> = (0..n).map(|_| random_rational(&mut rng)).collect();
            let w = reduce(&labels, &v);
            ensure(reduce(&labels, &embed(&labels, &w)) == w, || "R∘R† is not the identity".into())?;
            ensure(embed(&labels, &w) == twirl(&images, &v), || "R†∘R is not the H_c twirl".into())?;
        }
    }
    Ok(format!("{samples} random marginal vectors over {} blocks", orbits.len()))
}

pub fn symmetry_suite() -> Check {
    let parts = [
        source_party_commutation()?,
        outcome_commutation()?,
        associativity(1000, 1)?,
        orbit_sum_identity(100, 2)?,
        twirl_properties(20, 3)?,
        reduction_duality(100, 4)?,
    ];
    Ok(parts.join("; "))
}

/// Minimum norm point oracle check on random active sets: duality gaps,
/// hull membership and the separation certificate of optimality.
pub fn duality_suite(sets: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_gap: f64 = 0.0;
    let mut worst_vec: f64 = 0.0;
    let mut positive = 0;
    for case in 0..sets {
        let dim = rng.gen_range(1..=10);
        let count = rng.gen_range(1..=50);
        let vertices: Vec<Vec<f64>> = (0..count).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect();
        let active = ActiveSet::from_vertices(vertices.clone());
        let sol = max_gap(&active, 1e-12).map_err(|e| format!("case {case}: {e}"))?;
        let xn = norm(&sol.x_star);
        let gap = (xn - sol.s_star).abs();
        let vec_err = norm(&sol.x_star.iter().zip(&sol.w_star).map(|(x, w)| x - xn * w).collect::<Vec<_>>());
        worst_gap = worst_gap.max(gap / (1.0 + xn));
        worst_vec = worst_vec.max(vec_err);
        ensure(gap <= 1e-8 * (1.0 + xn), || format!("case {case}: | |x*| - s* | = {gap:e}"))?;
        ensure(vec_err <= 1e-8, || format!("case {case}: |x* - |x*| w*| = {vec_err:e}"))?;
        // x* is a convex combination of the vertices
        ensure(sol.lambda.iter().all(|&l| l >= 0.0) && (sol.lambda.iter().sum::<f64>() - 1.0).abs() < 1e-12, || {
            format!("case {case}: λ is not a probability vector")
        })?;
        let mut recon = vec![0.0; dim];
        for (v, l) in vertices.iter().zip(&sol.lambda) {
            for (r, x) in recon.iter_mut().zip(v) {
                *r += l * x;
            }
        }
        ensure(norm(&recon.iter().zip(&sol.x_star).map(|(a, b)| a - b).collect::<Vec<_>>()) < 1e-10, || {
            format!("case {case}: x* differs from Σ λ v")
        })?;
        // every vertex lies beyond the hyperplane through x* orthogonal to x*
        for (k, v) in vertices.iter().enumerate() {
            ensure(dot(&sol.x_star, v) >= xn * xn - 1e-10, || format!("case {case}: vertex {k} violates optimality"))?;
            if sol.lambda[k] > 1e-9 {
                ensure((dot(&sol.x_star, v) - xn * xn).abs() <= 1e-9, || format!("case {case}: complementarity fails at {k}"))?;
            }
        }
        if sol.s_star > 0.0 {
            positive += 1;
        }
    }
    Ok(format!(
        "{sets} sets ({positive} with positive gap); worst relative duality gap {worst_gap:.1e}, worst vector error {worst_vec:.1e}"
    ))
}

/// Reduced Frank-Wolfe verdicts against exact phase-one simplex on the
/// unreduced source-symmetric system, for random targets.
pub fn oracle_equivalence(targets: usize, seed: u64) -> Check {
    let g = graph222();
    let c0 = spec("c0", C0, &g);
    let canonical = CanonicalConstraint::from_spec(&c0, &g).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut incompatible = 0;
    for case in 0..targets {
        let p = random_target(&mut rng, 2, 8);
        let prob = ReducedProblem::build(g.clone(), p.clone(), std::slice::from_ref(&c0)).map_err(|e| e.to_string())?;
        let out = solve(&prob, &SolverConfig::default()).map_err(|e| e.to_string())?;
        let (a, b) = unreduced_system(&g, &canonical, &p);
        let oracle_feasible = feasible(&a, &b);
        match (&out.status, oracle_feasible) {
            (SolveStatus::Incompatible(_), false) => incompatible += 1,
            (SolveStatus::Inconclusive, true) => {}
            (status, feasible) => {
                return Err(format!(
                    "case {case} ({}): solver {} but oracle says {}",
                    p.to_table().replace('\n', " "),
                    match status {
                        SolveStatus::Incompatible(_) => "incompatible",
                        SolveStatus::Inconclusive => "inconclusive",
                        SolveStatus::Stalled => "stalled",
                    },
                    if feasible { "feasible" } else { "infeasible" }
                ))
            }
        }
    }
    Ok(format!("{targets} targets agree ({incompatible} incompatible)"))
}

pub fn ejm_certificate(v: u64) -> (ReducedProblem, Option<Certificate>) {
    let g = graph222();
    let prob = ReducedProblem::build(g.clone(), Family::EjmNoise.at(v, 512).unwrap(), &[spec("c0", C0, &g)]).unwrap();
    let out = solve(&prob, &SolverConfig::default()).unwrap();
    let cert = out.certificate().cloned();
    (prob, cert)
}

/// Round trip, single-coordinate perturbations, and fingerprint binding.
pub fn certificate_robustness(perturbations: usize, seed: u64) -> Check {
    let (prob, cert) = ejm_certificate(467);
    let cert = cert.ok_or("no certificate at 467/512")?;
    let parsed = Certificate::from_json(&cert.to_json()).map_err(|e| e.to_string())?;
    ensure(parsed == cert, || "JSON round trip changed the certificate".into())?;
    ensure(verify(&parsed, &prob).unwrap() == Verdict::Valid, || "round-tripped certificate is not valid".into())?;
    let w = cert.w().unwrap().to_big();
    let max_abs = w.iter().map(|x| x.abs()).max().unwrap();
    let max_abs: i64 = i64::try_from(&max_abs).map_err(|_| "certificate entries exceed i64")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut invalid = 0;
    for _ in 0..perturbations {
        let mut m = w.clone();
        let i = rng.gen_range(0..m.len());
        m[i] = if rng.gen_bool(0.5) {
            -&m[i]
        } else {
            // redraw the magnitude in [0, 10 max|w|], keeping the sign
            rng.gen_range(0..=10 * max_abs) * m[i].signum()
        };
        let mut mutated = cert.clone();
        mutated.w_int = m.iter().map(BigInt::to_string).collect();
        if matches!(verify(&mutated, &prob).unwrap(), Verdict::Invalid { .. }) {
            invalid += 1;
        }
    }
    let rate = invalid as f64 / perturbations as f64;
    ensure(rate >= 0.9, || format!("only {invalid}/{perturbations} perturbations rejected"))?;
    let g = graph222();
    let other = ReducedProblem::build(g.clone(), Family::EjmNoise.at(468, 512).unwrap(), &[spec("c0", C0, &g)]).unwrap();
    ensure(matches!(verify(&cert, &other).unwrap(), Verdict::FingerprintMismatch { .. }), || {
        "altered target not detected".into()
    })?;
    let mut zero = cert.clone();
    zero.w_int = vec!["0".into(); w.len()];
    ensure(matches!(verify(&zero, &prob).unwrap(), Verdict::Invalid { .. }), || "zero vector accepted".into())?;
    Ok(format!("round trip valid; {invalid}/{perturbations} perturbations rejected; mismatch detected"))
}
