mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{eval_polynomial, random_polynomial, sid, universe, NAMES};
use proptest::prelude::*;
use rgt_core::solver::ChoiceKey;
use rgt_core::{
    decision_equation, render_diagonal_form, solve_session, ActionUniverse, Alternative,
    InfluenceMatrix, InfluenceValue, Polynomial, SessionOptions, SubjectId,
};

fn full(u: &ActionUniverse) -> u64 {
    (1u64 << u.size()) - 1
}

fn polynomial(n: usize, meet: bool, choices: Vec<u8>) -> Polynomial {
    let subjects: Vec<SubjectId> = NAMES[..n].iter().map(|s| sid(s)).collect();
    random_polynomial(&subjects, meet, &mut choices.into_iter().cycle())
}

/// Every map from `vars` to bit patterns below `full + 1`.
fn ground_assignments(vars: &[SubjectId], full: u64) -> Vec<BTreeMap<SubjectId, u64>> {
    let mut out = vec![BTreeMap::new()];
    for v in vars {
        out = out
            .into_iter()
            .flat_map(|m| {
                (0..=full).map(move |bits| {
                    let mut m = m.clone();
                    m.insert(v.clone(), bits);
                    m
                })
            })
            .collect();
    }
    out
}

fn alternatives(
    u: &ActionUniverse,
    m: &BTreeMap<SubjectId, u64>,
) -> BTreeMap<SubjectId, Alternative> {
    m.iter()
        .map(|(k, bits)| (k.clone(), u.from_bits(*bits).unwrap()))
        .collect()
}

/// Matrix whose entries are concrete or symbolic, picked by `seeds`.
fn ground_or_symbolic(subjects: &[SubjectId], u: &ActionUniverse, seeds: &[u8]) -> InfluenceMatrix {
    let mut entries = Vec::new();
    let mut seed = seeds.iter().cycle();
    for s in subjects {
        for t in subjects.iter().filter(|t| *t != s) {
            let b = *seed.next().unwrap();
            let value = if b % 4 == 3 {
                InfluenceValue::Symbolic
            } else {
                InfluenceValue::Concrete(u.from_bits(u64::from(b >> 2) & full(u)).unwrap())
            };
            entries.push((s.clone(), t.clone(), value));
        }
    }
    InfluenceMatrix::new(subjects.to_vec(), entries).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn expansion_identity_and_monotone_bounds(
        n in 1usize..=4,
        size in 1usize..=3,
        meet in any::<bool>(),
        choices in proptest::collection::vec(any::<u8>(), 32),
    ) {
        let u = universe(size);
        let f = full(&u);
        let p = polynomial(n, meet, choices);
        let subjects = p.subjects();
        for s in &subjects {
            let eq = decision_equation(&p, s, &u).unwrap();
            for values in ground_assignments(&subjects, f) {
                let env = alternatives(&u, &values);
                let pos = eq.pos.eval(&env).unwrap().bits();
                let neg = eq.neg.eval(&env).unwrap().bits();
                let x = values[s];
                let whole = eval_polynomial(&p, &|v| values[v], f);
                prop_assert_eq!(whole, (pos & x) | (neg & !x & f));
                prop_assert_eq!(neg & !pos, 0);
            }
        }
    }

    /// The interval reported for every subject is exactly the brute-force
    /// solution set of its equation, for every value of the variables left
    /// symbolic.
    #[test]
    fn intervals_match_brute_force_solution_sets(
        n in 1usize..=4,
        size in 1usize..=3,
        meet in any::<bool>(),
        choices in proptest::collection::vec(any::<u8>(), 32),
        seeds in proptest::collection::vec(any::<u8>(), 12),
    ) {
        let u = universe(size);
        let f = full(&u);
        let p = polynomial(n, meet, choices);
        let subjects = p.subjects();
        let matrix = ground_or_symbolic(&subjects, &u, &seeds);
        let result = solve_session(&u, &p, &matrix, SessionOptions::default()).unwrap();
        prop_assert_eq!(result.branches.len(), 1);
        let intervals = &result.branches[0].intervals;
        for s in &subjects {
            let symbolic: Vec<SubjectId> = subjects
                .iter()
                .filter(|y| *y != s && matrix.get(y, s) == Some(&InfluenceValue::Symbolic))
                .cloned()
                .collect();
            let interval = &intervals[s];
            for values in ground_assignments(&symbolic, f) {
                let influence = |y: &SubjectId, x: u64| -> u64 {
                    if y == s {
                        return x;
                    }
                    match matrix.get(y, s).unwrap() {
                        InfluenceValue::Concrete(v) => v.bits(),
                        _ => values[y],
                    }
                };
                let pos = eval_polynomial(&p, &|y| influence(y, f), f);
                let neg = eval_polynomial(&p, &|y| influence(y, 0), f);
                let solutions: BTreeSet<u64> = (0..=f)
                    .filter(|&x| x == (pos & x) | (neg & !x & f))
                    .collect();
                let env = alternatives(&u, &values);
                let inf = interval.inf.eval(&env).unwrap().bits();
                let sup = interval.sup.eval(&env).unwrap().bits();
                let between: BTreeSet<u64> = (0..=f)
                    .filter(|&x| inf & !x == 0 && x & !sup == 0)
                    .collect();
                prop_assert_eq!(solutions, between);
            }
        }
    }

    #[test]
    fn diagonal_form_folds_back(
        n in 1usize..=6,
        meet in any::<bool>(),
        choices in proptest::collection::vec(any::<u8>(), 64),
    ) {
        let p = polynomial(n, meet, choices);
        let form = render_diagonal_form(&p);
        prop_assert_eq!(&form.fold().unwrap(), &p);
        prop_assert_eq!(form.folded(), p.to_string());
        prop_assert_eq!(form.lines().len(), p.depth() + 1);
    }

    #[test]
    fn branches_cover_every_expansion(
        n in 2usize..=4,
        meet in any::<bool>(),
        choices in proptest::collection::vec(any::<u8>(), 32),
        seeds in proptest::collection::vec(any::<u8>(), 24),
        bound in 1u64..=8,
    ) {
        let u = universe(3);
        let p = polynomial(n, meet, choices);
        let subjects = p.subjects();
        let mut entries = Vec::new();
        let mut seed = seeds.iter().cycle();
        for s in &subjects {
            // Rows are uniform half of the time, to exercise both key kinds.
            let uniform = seed.next().unwrap() % 2 == 0;
            let row_seed = (*seed.next().unwrap(), *seed.next().unwrap());
            for t in subjects.iter().filter(|t| *t != s) {
                let (a, b) = if uniform {
                    row_seed
                } else {
                    (*seed.next().unwrap(), *seed.next().unwrap())
                };
                let value = match a % 3 {
                    0 => InfluenceValue::Concrete(u.from_bits(u64::from(b) & 7).unwrap()),
                    1 => InfluenceValue::Symbolic,
                    _ => {
                        let sup = u64::from(b) & 7;
                        let inf = u64::from(b >> 3) & sup;
                        InfluenceValue::interval(u.from_bits(inf).unwrap(), u.from_bits(sup).unwrap())
                            .unwrap()
                    }
                };
                entries.push((s.clone(), t.clone(), value));
            }
        }
        let matrix = InfluenceMatrix::new(subjects.clone(), entries).unwrap();

        // Expected expansion factors, computed from the matrix alone.
        let mut expected: u64 = 1;
        for s in &subjects {
            let row: Vec<(u64, u64)> = matrix
                .entries()
                .filter(|(src, _, _)| *src == s)
                .filter_map(|(_, _, v)| match v {
                    InfluenceValue::Interval { inf, sup } => Some((inf.bits(), sup.bits())),
                    _ => None,
                })
                .collect();
            let size = |(inf, sup): (u64, u64)| 1u64 << (sup & !inf).count_ones();
            let factors: Vec<u64> = if row.windows(2).all(|w| w[0] == w[1]) {
                row.first().map(|&r| size(r)).into_iter().collect()
            } else {
                row.iter().map(|&r| size(r)).collect()
            };
            expected *= factors.into_iter().filter(|&k| k <= bound).product::<u64>();
        }

        let options = SessionOptions { enumeration_bound: bound, ..SessionOptions::default() };
        let result = solve_session(&u, &p, &matrix, options).unwrap();
        prop_assert_eq!(result.branch_count, expected);
        let all: Vec<_> = result.branches.iter().flat_map(|b| b.assignments.iter()).collect();
        prop_assert_eq!(all.len() as u64, expected);
        let distinct: BTreeSet<_> = all.iter().collect();
        prop_assert_eq!(distinct.len(), all.len());

        // Each assignment, substituted by hand, reproduces its branch.
        for branch in &result.branches {
            for assignment in &branch.assignments {
                let entries = matrix.entries().map(|(s, t, v)| {
                    let chosen = assignment
                        .get(&ChoiceKey::Source(s.clone()))
                        .or_else(|| assignment.get(&ChoiceKey::Entry(s.clone(), t.clone())));
                    let v = match chosen {
                        Some(alt) => InfluenceValue::Concrete(alt.clone()),
                        None => v.clone(),
                    };
                    (s.clone(), t.clone(), v)
                });
                let fixed = InfluenceMatrix::new(subjects.clone(), entries).unwrap();
                let no_expansion = SessionOptions { enumeration_bound: 0, ..SessionOptions::default() };
                let single = solve_session(&u, &p, &fixed, no_expansion).unwrap();
                prop_assert_eq!(single.branch_count, 1);
                prop_assert_eq!(&single.branches[0].intervals, &branch.intervals);
            }
        }
        let mut seen = Vec::new();
        for b in &result.branches {
            prop_assert!(!seen.contains(&&b.intervals), "branches must be merged");
            seen.push(&b.intervals);
        }
    }
}
