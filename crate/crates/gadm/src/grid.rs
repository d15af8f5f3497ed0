use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Periodic,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdOrder {
    Second,
    Fourth,
}

impl FdOrder {
    pub fn half_width(self) -> usize {
        match self {
            FdOrder::Second => 1,
            FdOrder::Fourth => 2,
        }
    }
    pub fn as_int(self) -> u32 {
        match self {
            FdOrder::Second => 2,
            FdOrder::Fourth => 4,
        }
    }
}

/// Uniform Cartesian grid. Periodic axes sample x = origin + i·h for i < n with
/// period n·h; the boundary axis (only axis 3) includes both faces, so its
/// extent is (n−1)·h.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub n: [usize; 3],
    pub h: [f64; 3],
    pub topology: [Topology; 3],
    pub origin: [f64; 3],
    pub fd: FdOrder,
}

impl Grid {
    pub fn new(n: [usize; 3], h: [f64; 3], topology: [Topology; 3], fd: FdOrder) -> Result<Self> {
        let g = Grid { n, h, topology, origin: [0.0; 3], fd };
        g.check()?;
        Ok(g)
    }

    /// Grid covering a box of the given extents.
    pub fn with_extent(n: [usize; 3], length: [f64; 3], topology: [Topology; 3], fd: FdOrder) -> Result<Self> {
        let mut h = [0.0; 3];
        for a in 0..3 {
            let cells = match topology[a] {
                Topology::Periodic => n[a] as f64,
                Topology::Boundary => n[a].saturating_sub(1).max(1) as f64,
            };
            h[a] = length[a] / cells;
        }
        Grid::new(n, h, topology, fd)
    }

    pub fn periodic(n: [usize; 3], length: [f64; 3]) -> Result<Self> {
        Grid::with_extent(n, length, [Topology::Periodic; 3], FdOrder::Fourth)
    }

    /// Periodic in x¹, x²; boundary faces at x³ = 0 and x³ = length[2].
    pub fn slab(n: [usize; 3], length: [f64; 3]) -> Result<Self> {
        Grid::with_extent(n, length, [Topology::Periodic, Topology::Periodic, Topology::Boundary], FdOrder::Fourth)
    }

    pub fn check(&self) -> Result<()> {
        let min = 2 * self.fd.half_width() + 1;
        for a in 0..3 {
            if self.n[a] < min {
                return Err(Error::Config(format!(
                    "axis {} has {} points; order-{} stencil needs at least {min}",
                    a + 1,
                    self.n[a],
                    self.fd.as_int()
                )));
            }
            if !(self.h[a].is_finite() && self.h[a] > 0.0) {
                return Err(Error::Config(format!("axis {} spacing must be positive", a + 1)));
            }
        }
        if self.topology[0] == Topology::Boundary || self.topology[1] == Topology::Boundary {
            return Err(Error::Config("boundary topology is only allowed on axis 3".into()));
        }
        Ok(())
    }

    pub fn with_order(&self, fd: FdOrder) -> Result<Self> {
        let mut g = self.clone();
        g.fd = fd;
        g.check()?;
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plane(&self) -> usize {
        self.n[1] * self.n[2]
    }

    pub fn strides(&self) -> [usize; 3] {
        [self.n[1] * self.n[2], self.n[2], 1]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n[1] + j) * self.n[2] + k
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.n[2];
        let r = idx / self.n[2];
        [r / self.n[1], r % self.n[1], k]
    }

    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        [
            self.origin[0] + c[0] as f64 * self.h[0],
            self.origin[1] + c[1] as f64 * self.h[1],
            self.origin[2] + c[2] as f64 * self.h[2],
        ]
    }

    pub fn extent(&self, a: usize) -> f64 {
        match self.topology[a] {
            Topology::Periodic => self.n[a] as f64 * self.h[a],
            Topology::Boundary => (self.n[a] - 1) as f64 * self.h[a],
        }
    }

    pub fn has_boundary(&self) -> bool {
        self.topology[2] == Topology::Boundary
    }

    pub fn min_h(&self) -> f64 {
        self.h[0].min(self.h[1]).min(self.h[2])
    }

    pub fn cell_volume(&self) -> f64 {
        self.h[0] * self.h[1] * self.h[2]
    }

    /// Indices of nodes on the x³ faces (lower face first). Empty without boundary.
    pub fn face_nodes(&self) -> Vec<usize> {
        if !self.has_boundary() {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(2 * self.n[0] * self.n[1]);
        for k in [0, self.n[2] - 1] {
            for i in 0..self.n[0] {
                for j in 0..self.n[1] {
                    out.push(self.index(i, j, k));
                }
            }
        }
        out
    }

    pub fn is_face(&self, idx: usize) -> bool {
        if !self.has_boundary() {
            return false;
        }
        let k = idx % self.n[2];
        k == 0 || k == self.n[2] - 1
    }

    /// Grid refined by 2^level: periodic axes double their point count,
    /// the boundary axis keeps its faces so existing nodes stay aligned.
    pub fn refined(&self, level: u32) -> Result<Self> {
        let f = 1usize << level;
        let mut n = self.n;
        let mut h = self.h;
        for a in 0..3 {
            n[a] = match self.topology[a] {
                Topology::Periodic => self.n[a] * f,
                Topology::Boundary => (self.n[a] - 1) * f + 1,
            };
            h[a] = self.h[a] / f as f64;
        }
        let mut g = Grid::new(n, h, self.topology, self.fd)?;
        g.origin = self.origin;
        Ok(g)
    }
}
