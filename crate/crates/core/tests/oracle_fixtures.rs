//! Frozen oracle values on the two-site frame h = [[2,-1],[-1,2]], Λ₀ = {0},
//! and oracle-vs-analytic agreement on small frames.

use harmneg_core::characteristic::{eigenstate_char, TestFunction};
use harmneg_core::fock::{FockOracle, OracleTolerances};
use harmneg_core::negativity::{
    ensemble_energy, exact_log_negativity, ground_state_negativity_closed_form, EnsembleSpec,
};
use harmneg_core::{Instance64, LatticeBox, Region, TruncationPolicy};
use nalgebra::{Complex, DMatrix, DVector};

/// `ln ‖ρ_N^{T₁}‖₁` from the dense Fock oracle at n_cut = 30.
const ORACLE_N1: f64 = 2.746_530_721_680_266_5e-1;
const ORACLE_N2: f64 = 3.922_794_676_721_626e-1;

fn hand() -> (DMatrix<f64>, Region, Instance64) {
    let b = LatticeBox::new(1, 0, 1).unwrap();
    let h = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
    let r = Region::from_indices(&b, &[0]).unwrap();
    let inst = Instance64::new(&h, &r).unwrap();
    (h, r, inst)
}

#[test]
fn analytic_matches_frozen_oracle_values() {
    let (_, _, inst) = hand();
    let policy = TruncationPolicy::new(200, 1e-12).unwrap();
    let n0 = exact_log_negativity(&EnsembleSpec::pure(0), &inst.spectrum, &policy).unwrap();
    assert!((n0.log_negativity - 0.25 * 3f64.ln()).abs() < 1e-10);
    assert!((ground_state_negativity_closed_form(inst.spectrum.values()) - 0.25 * 3f64.ln()).abs() < 1e-12);
    let n1 = exact_log_negativity(&EnsembleSpec::pure(1), &inst.spectrum, &policy).unwrap();
    let n2 = exact_log_negativity(&EnsembleSpec::pure(2), &inst.spectrum, &policy).unwrap();
    assert!((n1.log_negativity - ORACLE_N1).abs() < 1e-9, "{}", n1.log_negativity);
    assert!((n2.log_negativity - ORACLE_N2).abs() < 1e-9, "{}", n2.log_negativity);
    assert!(n1.log_negativity <= n1.product_bound && n2.log_negativity <= n2.product_bound);
}

#[test]
fn eigenstate_characteristic_functions_agree() {
    let (h, r, inst) = hand();
    let oracle = FockOracle::new(&h, &r, 24, OracleTolerances::default()).unwrap();
    let fs = [
        [Complex::new(0.3, -0.2), Complex::new(-0.4, 0.1)],
        [Complex::new(-0.6, 0.5), Complex::new(0.2, 0.3)],
    ];
    for f in fs {
        let tf = TestFunction::new(DVector::from_column_slice(&f));
        for alpha in [[0u32, 0], [1, 0], [0, 1], [1, 1], [2, 0], [0, 2]] {
            let analytic = eigenstate_char(&inst.frame, &alpha, &tf).unwrap();
            let brute = oracle.eigenstate_char(&alpha, &f).unwrap();
            assert!((analytic - brute).abs() < 1e-8, "{alpha:?}: {analytic} vs {brute}");
        }
    }
}

#[test]
fn partial_transpose_characteristic_function_agrees() {
    let (h, r, inst) = hand();
    let oracle = FockOracle::new(&h, &r, 20, OracleTolerances::default()).unwrap();
    let f = [Complex::new(0.25, 0.4), Complex::new(-0.3, -0.15)];
    let tf = TestFunction::new(DVector::from_column_slice(&f));
    for n in 0..3 {
        let analytic = harmneg_core::characteristic::ensemble_pt_char(&inst.corr, n, &tf).unwrap();
        let brute = oracle.ensemble_pt_char(n, &f).unwrap();
        assert!((analytic - brute).abs() < 1e-8, "N={n}: {analytic} vs {brute}");
    }
}

#[test]
fn ensemble_energy_agrees() {
    let (h, r, inst) = hand();
    let oracle = FockOracle::new(&h, &r, 24, OracleTolerances::default()).unwrap();
    for n in 0..3 {
        let brute = oracle.ensemble_energy(n).unwrap();
        assert!((brute - ensemble_energy(&inst.frame, n)).abs() < 1e-6);
    }
}
