#![allow(dead_code)]

use rgt_core::{ActionUniverse, Polynomial, SubjectId};

pub const NAMES: [&str; 6] = ["a", "b", "c", "d", "e", "f"];

pub fn sid(s: &str) -> SubjectId {
    SubjectId::new(s).unwrap()
}

pub fn universe(n: usize) -> ActionUniverse {
    ActionUniverse::new(["α", "β", "γ"].into_iter().take(n)).unwrap()
}

pub fn fixture(name: &str) -> String {
    let path = format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

/// Builds a random polynomial over `subjects`, alternating operators.
pub fn random_polynomial(
    subjects: &[SubjectId],
    meet: bool,
    choices: &mut impl Iterator<Item = u8>,
) -> Polynomial {
    if subjects.len() == 1 {
        return Polynomial::var(subjects[0].clone());
    }
    let k = 2 + choices.next().unwrap() as usize % (subjects.len() - 1);
    let mut blocks: Vec<Vec<SubjectId>> = vec![Vec::new(); k];
    for s in subjects {
        blocks[choices.next().unwrap() as usize % k].push(s.clone());
    }
    blocks.retain(|b| !b.is_empty());
    if blocks.len() < 2 {
        let moved = blocks[0].pop().unwrap();
        blocks.push(vec![moved]);
    }
    let children = blocks
        .iter()
        .map(|b| random_polynomial(b, !meet, choices))
        .collect();
    if meet {
        Polynomial::meet(children)
    } else {
        Polynomial::join(children)
    }
}

/// Evaluates a polynomial over bitmasks, independently of the library's
/// symbolic machinery.
pub fn eval_polynomial(p: &Polynomial, value: &dyn Fn(&SubjectId) -> u64, full: u64) -> u64 {
    match p {
        Polynomial::Var(s) => value(s),
        Polynomial::Meet(children) => children
            .iter()
            .fold(full, |acc, c| acc & eval_polynomial(c, value, full)),
        Polynomial::Join(children) => children
            .iter()
            .fold(0, |acc, c| acc | eval_polynomial(c, value, full)),
    }
}
