//! The kernels are generic over the scalar; instantiate a few paths at f32
//! with epsilon-scaled tolerances to keep the genericity honest.

use degenlab::matkernel::{eig_sym, split_parts, SymMat};
use degenlab::operators::{eval, Family, Jet, OperatorSpec};
use degenlab::proofkit::{corrected_hessian, fit_radial_coeffs, RadialProfile};

#[test]
fn f32_eig_and_split() {
    let s: SymMat<f32> = SymMat::from_fn(3, |i, j| (i + j) as f32 * 0.5 - 0.7);
    let e = eig_sym(&s).unwrap();
    let rec = e.reconstruct();
    assert!(rec.sub(&s).frob() <= 1e-4 * (1.0 + s.frob()));
    let (p, m) = split_parts(&s).unwrap();
    assert!(p.sub(&m).sub(&s).frob() <= 1e-4 * (1.0 + s.frob()));
}

#[test]
fn f32_envelope_duality() {
    let plus: OperatorSpec<f32> = OperatorSpec::new(Family::PucciPlus, 1.0, 1.0, 2.0).unwrap();
    let minus: OperatorSpec<f32> = OperatorSpec::new(Family::PucciMinus, 1.0, 1.0, 2.0).unwrap();
    let hess = SymMat::from_fn(2, |i, j| if i == j { 1.0 - 2.0 * i as f32 } else { 0.3 });
    let jet = Jet::new(vec![0.0, 0.0], vec![1.0, -0.5], hess.clone()).unwrap();
    let a = eval(&minus, &jet).unwrap();
    let jet_neg = Jet::new(vec![0.0, 0.0], vec![1.0, -0.5], hess.scale(-1.0)).unwrap();
    let b = -eval(&plus, &jet_neg).unwrap();
    assert!((a - b).abs() <= 1e-5 * (1.0 + b.abs()));
}

#[test]
fn f32_radial_fit() {
    let profile: RadialProfile<f32> = RadialProfile::holder(0.5).unwrap();
    let x = [0.3f32, -0.2];
    let h = corrected_hessian(&profile, &x).unwrap();
    let (beta, gamma, res) = fit_radial_coeffs(&h, &profile, &x).unwrap();
    assert!(res <= 1e-4 * (1.0 + h.frob()));
    assert!((0.5 - 1e-4..=1.0 + 1e-4).contains(&beta));
    assert!(gamma > 0.5 && gamma <= 1.5 + 1e-4);
}
