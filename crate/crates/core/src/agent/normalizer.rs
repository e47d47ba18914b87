/// Running per-coordinate mean and standard deviation, applied as
/// `clip((x − mean) / std, ±clip)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    count: f64,
    mean: Vec<f64>,
    std: Vec<f64>,
    eps: f64,
    clip: f64,
}

impl Normalizer {
    pub fn new(dim: usize, eps: f64, clip: f64) -> Self {
        Self {
            sum: vec![0.0; dim],
            sum_sq: vec![0.0; dim],
            count: 0.0,
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
            eps,
            clip,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    /// Folds a batch of observations into the running statistics.
    pub fn update<'a>(&mut self, rows: impl IntoIterator<Item = &'a [f64]>) {
        for row in rows {
            assert_eq!(row.len(), self.dim());
            for (i, &x) in row.iter().enumerate() {
                self.sum[i] += x;
                self.sum_sq[i] += x * x;
            }
            self.count += 1.0;
        }
        if self.count > 0.0 {
            for i in 0..self.dim() {
                let m = self.sum[i] / self.count;
                let var = (self.sum_sq[i] / self.count - m * m).max(0.0);
                self.mean[i] = m;
                self.std[i] = var.sqrt().max(self.eps);
            }
        }
    }

    /// Writes the normalised `x` into `out`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = ((x[i] - self.mean[i]) / self.std[i]).clamp(-self.clip, self.clip);
        }
    }

    pub(crate) fn raw_parts(&self) -> (&[f64], &[f64], f64) {
        (&self.sum, &self.sum_sq, self.count)
    }

    pub(crate) fn from_raw_parts(sum: Vec<f64>, sum_sq: Vec<f64>, count: f64, eps: f64, clip: f64) -> Self {
        let mut n = Self::new(sum.len(), eps, clip);
        n.sum = sum;
        n.sum_sq = sum_sq;
        n.count = count;
        n.update(std::iter::empty());
        n
    }
}
