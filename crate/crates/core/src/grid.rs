//! Voxel density grids and their on-disk formats.
//!
//! A [`DensityGrid`] stores one density per voxel in x-fastest order. Two
//! formats are supported:
//!
//! * `dgrid`: little-endian binary, `"DGRD"` magic, `u32` version, three
//!   `u32` voxel counts, three `f64` cell lengths, then `f32` densities.
//! * legacy ASCII VTK `STRUCTURED_POINTS` with a `density` cell scalar, for
//!   viewing in ParaView and friends.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{invalid, Error, Result};

pub const DGRID_MAGIC: &[u8; 4] = b"DGRD";
pub const DGRID_VERSION: u32 = 1;

/// Per-voxel densities in `[0, 1]` over a box-shaped unit cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    resolution: [usize; 3],
    densities: Vec<f64>,
    cell_lengths: [f64; 3],
}

impl DensityGrid {
    pub fn new(resolution: [usize; 3], densities: Vec<f64>, cell_lengths: [f64; 3]) -> Result<Self> {
        if resolution.iter().any(|&n| n == 0) {
            return Err(invalid(format!("voxel counts must be positive, got {resolution:?}")));
        }
        if cell_lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(invalid(format!("cell lengths must be positive, got {cell_lengths:?}")));
        }
        let expected = resolution.iter().product::<usize>();
        if densities.len() != expected {
            return Err(invalid(format!(
                "expected {expected} densities for {resolution:?}, got {}",
                densities.len()
            )));
        }
        if let Some(bad) = densities.iter().find(|d| !(0.0..=1.0).contains(*d)) {
            return Err(invalid(format!("density {bad} outside [0, 1]")));
        }
        Ok(Self {
            resolution,
            densities,
            cell_lengths,
        })
    }

    pub fn filled(resolution: [usize; 3], value: f64, cell_lengths: [f64; 3]) -> Result<Self> {
        let n = resolution.iter().product();
        Self::new(resolution, vec![value; n], cell_lengths)
    }

    /// A cubic grid `n × n × n` over the unit cube.
    pub fn cube(n: usize, value: f64) -> Result<Self> {
        Self::filled([n; 3], value, [1.0; 3])
    }

    pub fn resolution(&self) -> [usize; 3] {
        self.resolution
    }

    pub fn cell_lengths(&self) -> [f64; 3] {
        self.cell_lengths
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn len(&self) -> usize {
        self.densities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.densities.is_empty()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.resolution[0] * (j + self.resolution[1] * k)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.densities[self.index(i, j, k)]
    }

    /// Voxel edge lengths `(h_x, h_y, h_z)`.
    pub fn voxel_size(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| self.cell_lengths[a] / self.resolution[a] as f64)
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_lengths.iter().product()
    }

    /// Mean density, i.e. the fraction of the cell occupied by solid.
    pub fn relative_density(&self) -> f64 {
        self.densities.iter().sum::<f64>() / self.densities.len() as f64
    }

    /// Same grid with densities replaced; the new values are validated.
    pub fn with_densities(&self, densities: Vec<f64>) -> Result<Self> {
        Self::new(self.resolution, densities, self.cell_lengths)
    }

    pub fn same_shape(&self, other: &DensityGrid) -> bool {
        self.resolution == other.resolution
    }

    /// Rounds every density to `f32` precision so that the grid survives a
    /// `dgrid` round trip bit-for-bit.
    pub fn quantized(&self) -> Self {
        Self {
            resolution: self.resolution,
            densities: self.densities.iter().map(|&d| d as f32 as f64).collect(),
            cell_lengths: self.cell_lengths,
        }
    }

    pub fn write_dgrid<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(DGRID_MAGIC)?;
        w.write_all(&DGRID_VERSION.to_le_bytes())?;
        for &n in &self.resolution {
            w.write_all(&(n as u32).to_le_bytes())?;
        }
        for &l in &self.cell_lengths {
            w.write_all(&l.to_le_bytes())?;
        }
        for &d in &self.densities {
            w.write_all(&(d as f32).to_le_bytes())?;
        }
        w.flush()
    }

    pub fn to_dgrid_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(40 + 4 * self.densities.len());
        self.write_dgrid(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_dgrid<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != DGRID_MAGIC {
            return Err(invalid("not a dgrid stream (bad magic)"));
        }
        let version = read_u32(&mut r)?;
        if version != DGRID_VERSION {
            return Err(invalid(format!("unsupported dgrid version {version}")));
        }
        let mut resolution = [0usize; 3];
        for n in &mut resolution {
            *n = read_u32(&mut r)? as usize;
        }
        let mut cell_lengths = [0.0; 3];
        for l in &mut cell_lengths {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *l = f64::from_le_bytes(b);
        }
        let count: usize = resolution.iter().product();
        let mut payload = vec![0u8; 4 * count];
        r.read_exact(&mut payload)?;
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(invalid("trailing bytes after dgrid payload"));
        }
        let densities = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Self::new(resolution, densities, cell_lengths)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path.as_ref())?;
        self.write_dgrid(BufWriter::new(file))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path)?;
        Self::read_dgrid(BufReader::new(file)).map_err(|e| match e {
            Error::InvalidArgument(reason) => Error::Format {
                path: path.to_path_buf(),
                reason,
            },
            Error::Io(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => Error::Format {
                path: path.to_path_buf(),
                reason: "truncated dgrid file".into(),
            },
            other => other,
        })
    }

    /// Legacy ASCII VTK, one `density` scalar per voxel (cell data).
    pub fn write_vtk<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let [ex, ey, ez] = self.resolution;
        let [hx, hy, hz] = self.voxel_size();
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "gyrox density grid")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET STRUCTURED_POINTS")?;
        writeln!(w, "DIMENSIONS {} {} {}", ex + 1, ey + 1, ez + 1)?;
        writeln!(w, "ORIGIN 0 0 0")?;
        writeln!(w, "SPACING {hx} {hy} {hz}")?;
        writeln!(w, "CELL_DATA {}", self.densities.len())?;
        writeln!(w, "SCALARS density float 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for row in self.densities.chunks(ex) {
            let line: Vec<String> = row.iter().map(|d| format!("{}", *d as f32)).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        w.flush()
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_density() {
        assert!(DensityGrid::new([1, 1, 2], vec![0.5, 1.5], [1.0; 3]).is_err());
        assert!(DensityGrid::new([1, 1, 2], vec![0.5], [1.0; 3]).is_err());
        assert!(DensityGrid::new([0, 1, 2], vec![], [1.0; 3]).is_err());
    }

    #[test]
    fn relative_density_of_constant_grids() {
        assert_eq!(DensityGrid::cube(4, 1.0).unwrap().relative_density(), 1.0);
        assert_eq!(DensityGrid::cube(4, 0.0).unwrap().relative_density(), 0.0);
    }

    #[test]
    fn dgrid_header_layout() {
        let g = DensityGrid::new([2, 1, 1], vec![0.25, 1.0], [1.0, 2.0, 3.0]).unwrap();
        let bytes = g.to_dgrid_bytes();
        assert_eq!(&bytes[..4], b"DGRD");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(bytes[28..36].try_into().unwrap()), 2.0);
        assert_eq!(bytes.len(), 4 + 4 + 12 + 24 + 8);
        assert_eq!(f32::from_le_bytes(bytes[44..48].try_into().unwrap()), 0.25);
        assert_eq!(DensityGrid::read_dgrid(&bytes[..]).unwrap(), g);
    }

    #[test]
    fn dgrid_rejects_bad_streams() {
        let g = DensityGrid::cube(2, 1.0).unwrap();
        let mut bytes = g.to_dgrid_bytes();
        assert!(DensityGrid::read_dgrid(&bytes[..bytes.len() - 1]).is_err());
        bytes.push(0);
        assert!(DensityGrid::read_dgrid(&bytes[..]).is_err());
        bytes[0] = b'X';
        assert!(DensityGrid::read_dgrid(&bytes[..]).is_err());
    }

    #[test]
    fn vtk_of_solid_2x2x2() {
        let g = DensityGrid::cube(2, 1.0).unwrap();
        let mut out = Vec::new();
        g.write_vtk(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(text.contains("DIMENSIONS 3 3 3\n"));
        assert!(text.contains("CELL_DATA 8\n"));
        let values: Vec<f64> = text
            .lines()
            .skip_while(|l| !l.starts_with("LOOKUP_TABLE"))
            .skip(1)
            .flat_map(|l| l.split_whitespace().map(|v| v.parse::<f64>().unwrap()))
            .collect();
        assert_eq!(values, vec![1.0; 8]);
    }
}
