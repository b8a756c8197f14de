//! Adaptive-moment (Adam) optimiser over an embedding table.

use rayon::prelude::*;

use crate::embeddings::EmbeddingTable;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment buffers shaped like the table they update.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub params: AdamParams,
    pub first_moment: EmbeddingTable,
    pub second_moment: EmbeddingTable,
    pub steps: u64,
}

impl Adam {
    pub fn new(params: AdamParams, like: &EmbeddingTable) -> Self {
        Self {
            params,
            first_moment: like.zeros_like(),
            second_moment: like.zeros_like(),
            steps: 0,
        }
    }

    /// One dense update: every parameter moves, including those whose
    /// gradient is zero this step.
    pub fn step(&mut self, table: &mut EmbeddingTable, grad: &EmbeddingTable) {
        self.steps += 1;
        let AdamParams {
            learning_rate,
            beta1,
            beta2,
            eps,
        } = self.params;
        let t = self.steps as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);

        table
            .blocks_mut()
            .par_iter_mut()
            .zip(self.first_moment.blocks_mut().par_iter_mut())
            .zip(self.second_moment.blocks_mut().par_iter_mut())
            .zip(grad.blocks().par_iter())
            .for_each(|(((theta, m), v), g)| {
                let theta = theta.as_mut_slice();
                let m = m.as_mut_slice();
                let v = v.as_mut_slice();
                for i in 0..theta.len() {
                    let gi = g.as_slice()[i];
                    m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                    v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                    let m_hat = m[i] / bias1;
                    let v_hat = v[i] / bias2;
                    theta[i] -= learning_rate * m_hat / (v_hat.sqrt() + eps);
                }
            });
    }

    pub fn moments_finite(&self) -> bool {
        self.first_moment.is_finite() && self.second_moment.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate_against_gradient_sign() {
        let mut table = EmbeddingTable::from_row_major(1, 2, 2, &[1.0, 1.0]).unwrap();
        let grad = EmbeddingTable::from_row_major(1, 2, 2, &[0.5, -3.0]).unwrap();
        let mut adam = Adam::new(
            AdamParams {
                learning_rate: 0.1,
                ..Default::default()
            },
            &table,
        );
        adam.step(&mut table, &grad);
        let v = table.to_row_major();
        assert!((v[0] - 0.9).abs() < 1e-6);
        assert!((v[1] - 1.1).abs() < 1e-6);
    }

    #[test]
    fn zero_gradient_leaves_fresh_table_unchanged() {
        let mut table = EmbeddingTable::from_row_major(2, 2, 1, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let grad = table.zeros_like();
        let mut adam = Adam::new(AdamParams::default(), &table);
        adam.step(&mut table, &grad);
        assert_eq!(table.to_row_major(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn minimises_a_quadratic() {
        // f(x) = ½‖x − c‖², gradient x − c
        let c = [0.3, -0.7, 1.5, 0.0];
        let mut table = EmbeddingTable::zeros(1, 4, 2).unwrap();
        let mut adam = Adam::new(
            AdamParams {
                learning_rate: 0.05,
                ..Default::default()
            },
            &table,
        );
        for _ in 0..2000 {
            let x = table.to_row_major();
            let g: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
            let grad = EmbeddingTable::from_row_major(1, 4, 2, &g).unwrap();
            adam.step(&mut table, &grad);
        }
        for (x, target) in table.to_row_major().iter().zip(&c) {
            assert!((x - target).abs() < 1e-3);
        }
    }
}
