//! Adam with bias correction, in a dense flavour for small parameter blocks
//! and a row-sparse flavour for embedding tables.

use ndarray::Array2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamParams {
    pub fn with_lr(lr: f64) -> Self {
        AdamParams {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    #[inline]
    fn update(&self, t: i32, param: &mut f64, m: &mut f64, v: &mut f64, g: f64) {
        *m = self.beta1 * *m + (1.0 - self.beta1) * g;
        *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
        let m_hat = *m / (1.0 - self.beta1.powi(t));
        let v_hat = *v / (1.0 - self.beta2.powi(t));
        *param -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
    }
}

/// Dense Adam over a flat parameter slice.
#[derive(Debug, Clone)]
pub struct Adam {
    hp: AdamParams,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize, hp: AdamParams) -> Self {
        Adam {
            hp,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        for (((p, m), v), &g) in params
            .iter_mut()
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
            .zip(grads)
        {
            self.hp.update(self.t, p, m, v, g);
        }
    }
}

/// Lazy Adam over the rows of a matrix: only rows that received a gradient
/// in a step have their moments and values updated. The bias-correction
/// step counter is global.
#[derive(Debug, Clone)]
pub struct RowAdam {
    hp: AdamParams,
    t: i32,
    m: Array2<f64>,
    v: Array2<f64>,
}

impl RowAdam {
    pub fn new(rows: usize, cols: usize, hp: AdamParams) -> Self {
        RowAdam {
            hp,
            t: 0,
            m: Array2::zeros((rows, cols)),
            v: Array2::zeros((rows, cols)),
        }
    }

    pub fn tick(&mut self) {
        self.t += 1;
    }

    /// Applies one row update using the step counter of the last [`tick`](Self::tick).
    pub fn update_row(&mut self, params: &mut Array2<f64>, row: usize, grad: &[f64]) {
        let t = self.t.max(1);
        let mut p = params.row_mut(row);
        let mut m = self.m.row_mut(row);
        let mut v = self.v.row_mut(row);
        for k in 0..grad.len() {
            self.hp.update(t, &mut p[k], &mut m[k], &mut v[k], grad[k]);
        }
    }
}
