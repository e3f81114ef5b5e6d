use super::{check_dims, dot, sq_dist};
use crate::error::Result;

/// Loss value and gradients with respect to the user, positive item and
/// negative item vectors of one triplet.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletGrad {
    pub loss: f64,
    pub user: Vec<f64>,
    pub pos: Vec<f64>,
    pub neg: Vec<f64>,
}

impl TripletGrad {
    fn zero(loss: f64, dim: usize) -> Self {
        TripletGrad {
            loss,
            user: vec![0.0; dim],
            pos: vec![0.0; dim],
            neg: vec![0.0; dim],
        }
    }
}

fn check3(u: &[f64], p: &[f64], n: &[f64]) -> Result<()> {
    check_dims(u.len(), p.len())?;
    check_dims(u.len(), n.len())
}

/// `[m + d(u, v_pos) - d(u, v_neg)]_+` with squared Euclidean `d`.
pub fn cml_triplet_loss(u: &[f64], v_pos: &[f64], v_neg: &[f64], margin: f64) -> Result<f64> {
    check3(u, v_pos, v_neg)?;
    Ok((margin + sq_dist(u, v_pos) - sq_dist(u, v_neg)).max(0.0))
}

/// Hinge subgradient is taken as zero when the argument is exactly zero.
pub fn cml_triplet_grad(u: &[f64], v_pos: &[f64], v_neg: &[f64], margin: f64) -> Result<TripletGrad> {
    check3(u, v_pos, v_neg)?;
    let arg = margin + sq_dist(u, v_pos) - sq_dist(u, v_neg);
    if arg <= 0.0 {
        return Ok(TripletGrad::zero(0.0, u.len()));
    }
    let mut g = TripletGrad::zero(arg, u.len());
    for k in 0..u.len() {
        g.user[k] = 2.0 * (v_neg[k] - v_pos[k]);
        g.pos[k] = -2.0 * (u[k] - v_pos[k]);
        g.neg[k] = 2.0 * (u[k] - v_neg[k]);
    }
    Ok(g)
}

/// `-ln(sigmoid(x))`, evaluated without overflow for large `|x|`.
pub(crate) fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-ln sigmoid(u.v_pos - u.v_neg)`.
pub fn bpr_triplet_loss(u: &[f64], v_pos: &[f64], v_neg: &[f64]) -> Result<f64> {
    check3(u, v_pos, v_neg)?;
    Ok(neg_log_sigmoid(dot(u, v_pos) - dot(u, v_neg)))
}

pub fn bpr_triplet_grad(u: &[f64], v_pos: &[f64], v_neg: &[f64]) -> Result<TripletGrad> {
    check3(u, v_pos, v_neg)?;
    let x = dot(u, v_pos) - dot(u, v_neg);
    // d/dx of -ln sigmoid(x) is -sigmoid(-x)
    let s = -sigmoid(-x);
    let mut g = TripletGrad::zero(neg_log_sigmoid(x), u.len());
    for k in 0..u.len() {
        g.user[k] = s * (v_pos[k] - v_neg[k]);
        g.pos[k] = s * u[k];
        g.neg[k] = -s * u[k];
    }
    Ok(g)
}
