//! Shared helpers for the integration tests: fixture loading and random
//! models satisfying the real-symmetric conditions.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use twotime_core::model::computational_projectors;
use twotime_core::{
    build_grw_family, build_projective_family, CollapseFamily, EventSchedule, HermitianOperator,
    HilbertSpace, ModelConfig, TwoTimeModel,
};

pub const FIXTURES: &[&str] = &[
    "qubit_symmetric.json",
    "qubit_sigma_y.json",
    "qubit_two_event.json",
    "qubit_uniform_initial.json",
    "beam_splitter.json",
    "grw_five_site.json",
];

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture_config(name: &str) -> ModelConfig {
    ModelConfig::from_path(&fixture_path(name)).unwrap()
}

pub fn fixture(name: &str) -> TwoTimeModel {
    fixture_config(name).build().unwrap()
}

/// Every outcome sequence of the given length, lexicographic.
pub fn all_records(m: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|r| {
                (0..m).map(move |a| {
                    let mut r = r.clone();
                    r.push(a);
                    r
                })
            })
            .collect();
    }
    out
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0))
}

fn to_op(m: &DMatrix<f64>) -> HermitianOperator {
    let d = m.nrows();
    HermitianOperator::from_real_rows(&(0..d).map(|i| (0..d).map(|j| m[(i, j)]).collect()).collect::<Vec<_>>())
        .unwrap()
}

pub fn random_real_symmetric(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> HermitianOperator {
    let a = gaussian_matrix(rng, d);
    to_op(&((&a + a.transpose()) * (0.5 * scale)))
}

fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    gaussian_matrix(rng, d).qr().q()
}

/// Real PSD matrix with eigenvalues drawn from `[lo, hi]`, optionally
/// rescaled to unit trace.
pub fn random_real_psd(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64, unit_trace: bool) -> HermitianOperator {
    let q = random_orthogonal(rng, d);
    let mut eig: Vec<f64> = (0..d).map(|_| rng.random_range(lo..hi)).collect();
    if unit_trace {
        let s: f64 = eig.iter().sum();
        eig.iter_mut().for_each(|e| *e /= s);
    }
    let m = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eig)) * q.transpose();
    to_op(&((&m + m.transpose()) * 0.5))
}

/// Projectors onto a random real orthonormal basis, grouped into `m` blocks.
fn random_projective(rng: &mut ChaCha8Rng, d: usize) -> CollapseFamily {
    if rng.random_bool(0.3) {
        return build_projective_family(computational_projectors(d)).unwrap();
    }
    let q = random_orthogonal(rng, d);
    let m = rng.random_range(2..=d);
    // every block gets at least one vector
    let mut owner: Vec<usize> = (0..d).map(|i| if i < m { i } else { rng.random_range(0..m) }).collect();
    owner.sort_unstable();
    let projectors = (0..m)
        .map(|b| {
            let mut p = DMatrix::<f64>::zeros(d, d);
            for (i, _) in owner.iter().enumerate().filter(|(_, &o)| o == b) {
                let v = q.column(i);
                p += v * v.transpose();
            }
            to_op(&((&p + p.transpose()) * 0.5))
        })
        .collect();
    build_projective_family(projectors).unwrap()
}

fn random_grw(rng: &mut ChaCha8Rng, d: usize, sites: usize) -> CollapseFamily {
    let half = 0.5 * (sites - 1) as f64;
    let lattice: Vec<f64> = (0..sites).map(|i| i as f64 - half).collect();
    loop {
        let mut positions: Vec<f64> = (0..d).map(|_| rng.random_range(-0.8 * half..=0.8 * half)).collect();
        positions.sort_by(f64::total_cmp);
        let alpha = rng.random_range(0.3..1.5);
        let x = HermitianOperator::from_real_rows(
            &(0..d)
                .map(|i| (0..d).map(|j| if i == j { positions[i] } else { 0.0 }).collect())
                .collect::<Vec<_>>(),
        )
        .unwrap();
        if let Ok(f) = build_grw_family(&lattice, &x, alpha) {
            return f;
        }
    }
}

/// A random model meeting the symmetry conditions. `large` forces a record
/// space above the exhaustive limit.
pub fn random_symmetric_model(rng: &mut ChaCha8Rng, large: bool) -> TwoTimeModel {
    let d = rng.random_range(2..=6);
    let (family, events) = if large {
        (random_grw(rng, d, 12), 4)
    } else if rng.random_bool(0.5) {
        (random_projective(rng, d), rng.random_range(1..=4))
    } else {
        let sites = rng.random_range(3..=8);
        (random_grw(rng, d, sites), rng.random_range(1..=4))
    };
    let mut t = 0.0;
    let mut times = vec![0.0];
    for _ in 0..=events {
        t += rng.random_range(0.1..1.2);
        times.push(t);
    }
    TwoTimeModel::new(
        HilbertSpace::numbered(d).unwrap(),
        random_real_symmetric(rng, d, 1.5),
        family,
        EventSchedule::new(times).unwrap(),
        random_real_psd(rng, d, 0.0, 1.0, true),
        random_real_psd(rng, d, 0.05, 1.0, false),
    )
    .unwrap()
}

/// Same model with a replaced boundary.
pub fn with_boundaries(
    model: &TwoTimeModel,
    rho_initial: Option<HermitianOperator>,
    rho_final: Option<HermitianOperator>,
) -> TwoTimeModel {
    TwoTimeModel::new(
        model.space().clone(),
        model.hamiltonian().clone(),
        model.family().clone(),
        (**model.schedule()).clone(),
        rho_initial.unwrap_or_else(|| model.rho_initial().operator().clone()),
        rho_final.unwrap_or_else(|| model.rho_final().operator().clone()),
    )
    .unwrap()
}
