use super::scalar::Scalar;

/// Single-sample activation volume laid out `[channel][t][h][w]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume<S> {
    pub channels: usize,
    pub dims: [usize; 3],
    pub data: Vec<S>,
}

impl<S: Scalar> Volume<S> {
    pub fn zeros(channels: usize, dims: [usize; 3]) -> Self {
        Self {
            channels,
            dims,
            data: vec![S::zero(); channels * dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn from_data(channels: usize, dims: [usize; 3], data: Vec<S>) -> Self {
        assert_eq!(data.len(), channels * dims[0] * dims[1] * dims[2]);
        Self {
            channels,
            dims,
            data,
        }
    }

    #[inline]
    pub fn voxels(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn channel(&self, c: usize) -> &[S] {
        let n = self.voxels();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [S] {
        let n = self.voxels();
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Stack along the channel axis.
    pub fn concat(&self, other: &Volume<S>) -> Volume<S> {
        assert_eq!(self.dims, other.dims);
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Volume::from_data(self.channels + other.channels, self.dims, data)
    }

    /// Inverse of [`Volume::concat`]: split off the first `first` channels.
    pub fn split(&self, first: usize) -> (Volume<S>, Volume<S>) {
        let cut = first * self.voxels();
        (
            Volume::from_data(first, self.dims, self.data[..cut].to_vec()),
            Volume::from_data(self.channels - first, self.dims, self.data[cut..].to_vec()),
        )
    }

    pub fn add_assign(&mut self, other: &Volume<S>) {
        assert_eq!(self.data.len(), other.data.len());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(S) -> T) -> Volume<T> {
        Volume::from_data(self.channels, self.dims, self.data.iter().map(|&v| f(v)).collect())
    }
}
