use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::reference::ReferenceForm;
use crate::error::{Error, Result};
use crate::families::TestFamily;
use crate::linalg;

/// Nonnegative harmonic function with its measured class constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicProfile {
    pub values: Vec<f64>,
    pub boundary: Vec<usize>,
    /// `sup |∫ dΓ(f,h)| / ∫ f dμ` over nonnegative `f` supported off the boundary.
    pub c_h_prime: f64,
    /// `sup ∫ f² dΓ(h,h) / ‖f‖²_F` over `f` supported off the boundary.
    pub c_h: f64,
    pub family: String,
    pub witness_vertex: usize,
    pub witness: Vec<f64>,
}

/// Solves the Dirichlet problem `L*h = 0` off `boundary` and certifies the class constants.
pub fn harmonic_profile(form: &ReferenceForm, boundary: &[(usize, f64)]) -> Result<HarmonicProfile> {
    harmonic_profile_with(form, boundary, None)
}

/// As [`harmonic_profile`]; an extra nonnegative family is swept as a cross-check and
/// its supremum folded into the reported constants.
pub fn harmonic_profile_with(
    form: &ReferenceForm,
    boundary: &[(usize, f64)],
    family: Option<&TestFamily>,
) -> Result<HarmonicProfile> {
    let n = form.len();
    if boundary.is_empty() {
        return Err(Error::Empty("boundary set"));
    }
    let mut is_b = vec![false; n];
    let mut h = vec![0.0; n];
    for &(v, val) in boundary {
        if v >= n {
            return Err(Error::Vertex(v));
        }
        if !(val >= 0.0) {
            return Err(Error::Invalid(format!("negative boundary value {val} at {v}")));
        }
        is_b[v] = true;
        h[v] = val;
    }
    let interior: Vec<usize> = (0..n).filter(|&v| !is_b[v]).collect();
    let k = form.stiffness();
    if !interior.is_empty() {
        let m = interior.len();
        let kii = DMatrix::from_fn(m, m, |i, j| k[(interior[i], interior[j])]);
        let rhs = DVector::from_fn(m, |i, _| -(0..n).filter(|&b| is_b[b]).map(|b| k[(interior[i], b)] * h[b]).sum::<f64>());
        let sol = kii
            .cholesky()
            .ok_or_else(|| Error::Singular("interior not connected to the boundary".into()))?
            .solve(&rhs);
        for (i, &v) in interior.iter().enumerate() {
            h[v] = sol[i].max(0.0);
        }
    }
    let mu = &form.graph().measure;
    let kh = k * DVector::from_column_slice(&h);
    let mut c_prime = 0.0;
    let mut witness_vertex = interior.first().copied().unwrap_or(0);
    for &v in &interior {
        let r = kh[v].abs() / mu[v];
        if r > c_prime {
            c_prime = r;
            witness_vertex = v;
        }
    }
    // ∫ f² dΓ(h,h) against ‖f‖²_F on functions vanishing on the boundary.
    let gam = form.gamma(&h, &h);
    let (mut c_h, mut witness) = (0.0, vec![0.0; n]);
    if !interior.is_empty() {
        let m = interior.len();
        let a = DMatrix::from_fn(m, m, |i, j| if i == j { gam[interior[i]] * mu[interior[i]] } else { 0.0 });
        let f = DMatrix::from_fn(m, m, |i, j| {
            k[(interior[i], interior[j])] + if i == j { mu[interior[i]] } else { 0.0 }
        });
        let eig = linalg::sym_gen_eigen(&a, &f)?;
        c_h = eig.values[m - 1].max(0.0);
        for (i, &v) in interior.iter().enumerate() {
            witness[v] = eig.vectors[(i, m - 1)];
        }
    }
    let mut fam_id = "exact".to_string();
    if let Some(fam) = family {
        fam_id = format!("exact+{}", fam.id);
        for f in &fam.functions {
            let f: Vec<f64> = (0..n).map(|v| if is_b[v] { 0.0 } else { f[v] }).collect();
            let mass = form.integral(&f);
            if mass > 0.0 {
                c_prime = f64::max(c_prime, form.energy(&f, &h)?.abs() / mass);
            }
            let nf = form.norm_f_sq(&f);
            if nf > 0.0 {
                let sq: Vec<f64> = f.iter().map(|v| v * v).collect();
                let lhs: f64 = (0..n).map(|x| sq[x] * gam[x] * mu[x]).sum();
                c_h = f64::max(c_h, lhs / nf);
            }
        }
    }
    Ok(HarmonicProfile {
        values: h,
        boundary: boundary.iter().map(|b| b.0).collect(),
        c_h_prime: c_prime,
        c_h,
        family: fam_id,
        witness_vertex,
        witness,
    })
}
