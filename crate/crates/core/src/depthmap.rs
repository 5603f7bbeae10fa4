//! A single-channel depth map on a strided pixel grid. Cell (x, y) covers
//! the image block starting at (x * stride, y * stride); 0.0 means "no
//! depth" (sky / no return).

#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    stride: u32,
    data: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, stride: u32, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height, "depth map data/shape mismatch");
        Self {
            width,
            height,
            stride,
            data,
        }
    }

    pub fn zeros(width: usize, height: usize, stride: u32) -> Self {
        Self::new(width, height, stride, vec![0.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn stride(&self) -> u32 {
        self.stride
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Count of pixels carrying a depth (> 0).
    pub fn observed(&self) -> usize {
        self.data.iter().filter(|&&d| d > 0.0).count()
    }
}
