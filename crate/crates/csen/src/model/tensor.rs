//! Channel-major activation tensor used inside the network.

/// Dense [channel][row][col] tensor.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Tensor {
    pub ch: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(ch: usize, h: usize, w: usize) -> Self {
        Tensor {
            ch,
            h,
            w,
            data: vec![0.0; ch * h * w],
        }
    }

    pub fn from_plane(plane: &[f64], h: usize, w: usize) -> Self {
        debug_assert_eq!(plane.len(), h * w);
        Tensor {
            ch: 1,
            h,
            w,
            data: plane.to_vec(),
        }
    }

    #[inline]
    pub fn plane(&self, c: usize) -> &[f64] {
        &self.data[c * self.h * self.w..(c + 1) * self.h * self.w]
    }

    #[inline]
    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let sz = self.h * self.w;
        &mut self.data[c * sz..(c + 1) * sz]
    }
}
