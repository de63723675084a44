use num_complex::Complex64;

/// Downlink precoding vectors w_km in C^N for every (user k, ap m), stored in
/// the same `(k * M + m) * N` block layout as `ChannelRealization`.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    num_aps: usize,
    num_antennas: usize,
    num_users: usize,
    w: Vec<Complex64>,
}

impl Precoder {
    pub fn zeros(num_aps: usize, num_antennas: usize, num_users: usize) -> Self {
        Self {
            num_aps,
            num_antennas,
            num_users,
            w: vec![Complex64::new(0.0, 0.0); num_aps * num_antennas * num_users],
        }
    }

    pub fn num_aps(&self) -> usize {
        self.num_aps
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    fn offset(&self, user: usize, ap: usize) -> usize {
        (user * self.num_aps + ap) * self.num_antennas
    }

    pub fn vector(&self, user: usize, ap: usize) -> &[Complex64] {
        let start = self.offset(user, ap);
        &self.w[start..start + self.num_antennas]
    }

    pub fn vector_mut(&mut self, user: usize, ap: usize) -> &mut [Complex64] {
        let start = self.offset(user, ap);
        &mut self.w[start..start + self.num_antennas]
    }

    pub fn set_vector(&mut self, user: usize, ap: usize, values: &[Complex64]) {
        self.vector_mut(user, ap).copy_from_slice(values);
    }

    /// Total transmit power sum_{k,m} ||w_km||^2.
    pub fn total_power(&self) -> f64 {
        self.w.iter().map(|w| w.norm_sqr()).sum()
    }

    /// Power radiated by ap `m` across all users.
    pub fn ap_power(&self, ap: usize) -> f64 {
        (0..self.num_users)
            .map(|k| self.vector(k, ap).iter().map(|w| w.norm_sqr()).sum::<f64>())
            .sum()
    }

    pub fn user_power(&self, user: usize) -> f64 {
        (0..self.num_aps)
            .map(|m| self.vector(user, m).iter().map(|w| w.norm_sqr()).sum::<f64>())
            .sum()
    }
}
