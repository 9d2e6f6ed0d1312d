use alloc::vec::Vec;

use crate::graphical::Site;

/// Never infected.
pub const FRESH: i8 = -1;
/// Infected before, currently healthy.
pub const RECOVERED: i8 = 0;
pub const INFECTED: i8 = 1;

/// Site states on Z: an explicit finite window plus a constant state on each
/// side of it.
///
/// Contact-process configurations use only `INFECTED` and `RECOVERED`.
#[derive(Debug, Clone)]
pub struct Configuration {
    lo: Site,
    cells: Vec<i8>,
    left: i8,
    right: i8,
}

impl Configuration {
    pub fn new(left: i8, right: i8) -> Self {
        Configuration { lo: 0, cells: Vec::new(), left, right }
    }

    /// Origin infected, every other site fresh.
    pub fn standard() -> Self {
        Configuration::single(0)
    }

    /// `x` infected, every other site fresh.
    pub fn single(x: Site) -> Self {
        Configuration::interval(x, x)
    }

    /// `[a, b]` infected, every other site fresh.
    pub fn interval(a: Site, b: Site) -> Self {
        let mut c = Configuration::new(FRESH, FRESH);
        for x in a..=b {
            c.set(x, INFECTED);
        }
        c
    }

    /// Every site `<= x` infected, every site `> x` fresh.
    pub fn half_line(x: Site) -> Self {
        let mut c = Configuration::new(INFECTED, FRESH);
        c.set(x, INFECTED);
        c
    }

    /// The half-line start at the origin.
    pub fn eta_bar() -> Self {
        Configuration::half_line(0)
    }

    /// `sites` infected, everything else in state `background`.
    pub fn from_sites(sites: impl IntoIterator<Item = Site>, background: i8) -> Self {
        let mut c = Configuration::new(background, background);
        for x in sites {
            c.set(x, INFECTED);
        }
        c
    }

    /// Explicit states on `[lo, lo + states.len())`.
    pub fn from_states(lo: Site, states: &[i8], left: i8, right: i8) -> Self {
        Configuration { lo, cells: states.to_vec(), left, right }
    }

    pub fn left_default(&self) -> i8 {
        self.left
    }

    pub fn right_default(&self) -> i8 {
        self.right
    }

    /// Bounds of the explicit window (possibly padded with default values).
    pub fn window(&self) -> Option<(Site, Site)> {
        (!self.cells.is_empty()).then(|| (self.lo, self.lo + self.cells.len() as Site - 1))
    }

    pub fn is_finite(&self) -> bool {
        self.left != INFECTED && self.right != INFECTED
    }

    #[inline]
    pub fn get(&self, x: Site) -> i8 {
        let i = x - self.lo;
        if i < 0 {
            self.left
        } else if (i as usize) < self.cells.len() {
            self.cells[i as usize]
        } else {
            self.right
        }
    }

    pub fn set(&mut self, x: Site, v: i8) {
        if self.cells.is_empty() {
            self.lo = x;
            self.cells.push(v);
            return;
        }
        let i = x - self.lo;
        if i < 0 {
            let grow = (-i) as usize + 8 + self.cells.len() / 2;
            let mut cells = alloc::vec![self.left; grow];
            cells.extend_from_slice(&self.cells);
            self.cells = cells;
            self.lo -= grow as Site;
        } else if i as usize >= self.cells.len() {
            let need = i as usize + 1 + 8 + self.cells.len() / 2;
            self.cells.resize(need, self.right);
        }
        let i = (x - self.lo) as usize;
        self.cells[i] = v;
    }

    /// Infected sites of the window, ascending.
    pub fn infected(&self) -> Vec<Site> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == INFECTED)
            .map(|(i, _)| self.lo + i as Site)
            .collect()
    }

    pub fn count_infected(&self) -> usize {
        self.cells.iter().filter(|&&v| v == INFECTED).count()
    }

    /// Largest infected site in the window.
    pub fn rightmost(&self) -> Option<Site> {
        self.cells.iter().rposition(|&v| v == INFECTED).map(|i| self.lo + i as Site)
    }

    /// Smallest infected site in the window.
    pub fn leftmost(&self) -> Option<Site> {
        self.cells.iter().position(|&v| v == INFECTED).map(|i| self.lo + i as Site)
    }

    /// Replaces an infected left default by `depth` explicit infected sites
    /// below the window and a recovered background beyond them.
    pub fn truncated(&self, depth: Site) -> Configuration {
        let c = self.clone();
        if c.left != INFECTED {
            return c;
        }
        let lo = c.window().map_or(0, |w| w.0);
        let mut cells = alloc::vec![INFECTED; depth as usize];
        cells.extend_from_slice(&c.cells);
        Configuration { lo: lo - depth, cells, left: RECOVERED, right: c.right }
    }

    /// Sitewise `self <= other` in the order −1 < 0 < 1.
    pub fn le(&self, other: &Configuration) -> bool {
        if self.left > other.left || self.right > other.right {
            return false;
        }
        let (lo, hi) = span(self, other);
        (lo..=hi).all(|x| self.get(x) <= other.get(x))
    }
}

fn span(a: &Configuration, b: &Configuration) -> (Site, Site) {
    let ws = [a.window(), b.window()];
    let lo = ws.iter().flatten().map(|w| w.0).min().unwrap_or(0);
    let hi = ws.iter().flatten().map(|w| w.1).max().unwrap_or(-1);
    (lo, hi)
}

impl PartialEq for Configuration {
    fn eq(&self, other: &Self) -> bool {
        if self.left != other.left || self.right != other.right {
            return false;
        }
        let (lo, hi) = span(self, other);
        (lo..=hi).all(|x| self.get(x) == other.get(x))
    }
}
