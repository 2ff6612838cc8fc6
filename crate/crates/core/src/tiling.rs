//! Conversion between row-major matrices and the device tile layout, plus
//! tile-multiple padding.
//!
//! Device memory holds 32x32 tiles ordered row-major by tile coordinate.
//! Inside a tile, four 16x16 faces are stored in the order top-left,
//! top-right, bottom-left, bottom-right, each face row-major. See
//! `docs/tile-layout.md` for a worked 32x64 index map.

use thiserror::Error;

use crate::accel::MachineSpec;
use crate::numerics::Bf16;

/// Tile edge length. The device APIs operate only on 32x32 tiles.
pub const TILE_DIM: usize = 32;
/// Face edge length; a tile is a 2x2 grid of faces.
pub const FACE_DIM: usize = 16;
/// Elements per tile.
pub const TILE_ELEMS: usize = TILE_DIM * TILE_DIM;
/// Elements per face.
pub const FACE_ELEMS: usize = FACE_DIM * FACE_DIM;
/// Bytes per element.
pub const BF16_BYTES: usize = 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TilingError {
    #[error("matrix {rows}x{cols} is not aligned to {TILE_DIM}x{TILE_DIM} tiles")]
    Misaligned { rows: usize, cols: usize },
    #[error("data length {len} does not match {rows}x{cols}")]
    LengthMismatch {
        rows: usize,
        cols: usize,
        len: usize,
    },
    #[error("logical region {rows}x{cols} exceeds tiled buffer {max_rows}x{max_cols}")]
    BoundsExceeded {
        rows: usize,
        cols: usize,
        max_rows: usize,
        max_cols: usize,
    },
}

/// Flat buffer of 32x32 tiles in device layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileBuffer {
    tile_rows: usize,
    tile_cols: usize,
    data: Vec<Bf16>,
}

impl TileBuffer {
    pub fn zeros(tile_rows: usize, tile_cols: usize) -> Self {
        Self {
            tile_rows,
            tile_cols,
            data: vec![Bf16::ZERO; tile_rows * tile_cols * TILE_ELEMS],
        }
    }

    #[inline]
    pub fn tile_rows(&self) -> usize {
        self.tile_rows
    }

    #[inline]
    pub fn tile_cols(&self) -> usize {
        self.tile_cols
    }

    #[inline]
    pub fn tile_count(&self) -> usize {
        self.tile_rows * self.tile_cols
    }

    #[inline]
    pub fn data(&self) -> &[Bf16] {
        &self.data
    }

    /// The 1024-element slice of tile `t` (tiles are row-major by coordinate).
    #[inline]
    pub fn tile(&self, t: usize) -> &[Bf16] {
        &self.data[t * TILE_ELEMS..(t + 1) * TILE_ELEMS]
    }

    #[inline]
    pub fn tile_mut(&mut self, t: usize) -> &mut [Bf16] {
        &mut self.data[t * TILE_ELEMS..(t + 1) * TILE_ELEMS]
    }

    pub fn bytes(&self) -> u64 {
        (self.data.len() * BF16_BYTES) as u64
    }
}

/// Offset of element (r, c) inside one tile's 1024-element slice.
///
/// Face index is `(r / 16) * 2 + (c / 16)`; faces are row-major inside.
#[inline]
pub const fn tile_offset(r: usize, c: usize) -> usize {
    let face = (r / FACE_DIM) * 2 + (c / FACE_DIM);
    face * FACE_ELEMS + (r % FACE_DIM) * FACE_DIM + (c % FACE_DIM)
}

/// Row-major matrix zero-padded up to tile multiples in both dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaddedMatrix {
    logical_rows: usize,
    logical_cols: usize,
    padded_rows: usize,
    padded_cols: usize,
    data: Vec<Bf16>,
}

impl PaddedMatrix {
    #[inline]
    pub fn logical_rows(&self) -> usize {
        self.logical_rows
    }

    #[inline]
    pub fn logical_cols(&self) -> usize {
        self.logical_cols
    }

    #[inline]
    pub fn padded_rows(&self) -> usize {
        self.padded_rows
    }

    #[inline]
    pub fn padded_cols(&self) -> usize {
        self.padded_cols
    }

    #[inline]
    pub fn data(&self) -> &[Bf16] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Bf16 {
        self.data[r * self.padded_cols + c]
    }
}

const fn round_up(n: usize, to: usize) -> usize {
    n.div_ceil(to) * to
}

/// Smallest zero-padding of a row-major matrix to multiples of 32 in both
/// dimensions. The logical region is preserved bit-exactly.
pub fn pad_to_tiles(rows: usize, cols: usize, data: &[Bf16]) -> Result<PaddedMatrix, TilingError> {
    if data.len() != rows * cols {
        return Err(TilingError::LengthMismatch {
            rows,
            cols,
            len: data.len(),
        });
    }
    let padded_rows = round_up(rows, TILE_DIM);
    let padded_cols = round_up(cols, TILE_DIM);
    let mut padded = vec![Bf16::ZERO; padded_rows * padded_cols];
    for r in 0..rows {
        padded[r * padded_cols..r * padded_cols + cols]
            .copy_from_slice(&data[r * cols..(r + 1) * cols]);
    }
    Ok(PaddedMatrix {
        logical_rows: rows,
        logical_cols: cols,
        padded_rows,
        padded_cols,
        data: padded,
    })
}

/// Convert a row-major matrix with tile-aligned dimensions to device layout.
pub fn tilize(rows: usize, cols: usize, data: &[Bf16]) -> Result<TileBuffer, TilingError> {
    if !rows.is_multiple_of(TILE_DIM) || !cols.is_multiple_of(TILE_DIM) {
        return Err(TilingError::Misaligned { rows, cols });
    }
    if data.len() != rows * cols {
        return Err(TilingError::LengthMismatch {
            rows,
            cols,
            len: data.len(),
        });
    }
    let tile_rows = rows / TILE_DIM;
    let tile_cols = cols / TILE_DIM;
    let mut out = TileBuffer::zeros(tile_rows, tile_cols);
    for r in 0..rows {
        let tr = r / TILE_DIM;
        let rr = r % TILE_DIM;
        for c in 0..cols {
            let tile = tr * tile_cols + c / TILE_DIM;
            out.data[tile * TILE_ELEMS + tile_offset(rr, c % TILE_DIM)] = data[r * cols + c];
        }
    }
    Ok(out)
}

/// Recover the logical `rows x cols` row-major region from a tiled buffer.
/// Exact inverse of [`tilize`] restricted to the logical region.
pub fn untilize(t: &TileBuffer, rows: usize, cols: usize) -> Result<Vec<Bf16>, TilingError> {
    let max_rows = t.tile_rows * TILE_DIM;
    let max_cols = t.tile_cols * TILE_DIM;
    if rows > max_rows || cols > max_cols {
        return Err(TilingError::BoundsExceeded {
            rows,
            cols,
            max_rows,
            max_cols,
        });
    }
    let mut out = vec![Bf16::ZERO; rows * cols];
    for r in 0..rows {
        let tr = r / TILE_DIM;
        let rr = r % TILE_DIM;
        for c in 0..cols {
            let tile = tr * t.tile_cols + c / TILE_DIM;
            out[r * cols + c] = t.data[tile * TILE_ELEMS + tile_offset(rr, c % TILE_DIM)];
        }
    }
    Ok(out)
}

/// Seconds the host spends converting `elements` between layouts.
pub fn cpu_conversion_cost(elements: u64, spec: &MachineSpec) -> f64 {
    elements as f64 / spec.tilize_throughput_elems_per_s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent layout oracle: enumerate device order with nested loops
    /// (tiles, then faces, then face rows/cols) and record which row-major
    /// element lands at each flat position.
    fn layout_oracle(rows: usize, cols: usize) -> Vec<usize> {
        let mut map = Vec::with_capacity(rows * cols);
        for tr in (0..rows).step_by(TILE_DIM) {
            for tc in (0..cols).step_by(TILE_DIM) {
                for (fr, fc) in [(0, 0), (0, FACE_DIM), (FACE_DIM, 0), (FACE_DIM, FACE_DIM)] {
                    for r in 0..FACE_DIM {
                        for c in 0..FACE_DIM {
                            map.push((tr + fr + r) * cols + (tc + fc + c));
                        }
                    }
                }
            }
        }
        map
    }

    fn index_matrix(rows: usize, cols: usize) -> Vec<Bf16> {
        // Values encode positions; u16 patterns are fine as opaque payloads
        // but must stay finite for comparisons, so use small floats.
        (0..rows * cols)
            .map(|i| Bf16::from_f32((i % 2048) as f32))
            .collect()
    }

    #[test]
    fn golden_32x32_index_map() {
        let data: Vec<Bf16> = (0..1024).map(|i| Bf16::from_f32(i as f32)).collect();
        let t = tilize(32, 32, &data).unwrap();
        // Start of the top-right face is row 0, col 16.
        assert_eq!(t.data()[256].to_f32(), 16.0);
        // Full map against the oracle.
        let map = layout_oracle(32, 32);
        for (flat, &src) in map.iter().enumerate() {
            assert_eq!(t.data()[flat], data[src], "flat index {flat}");
        }
    }

    #[test]
    fn golden_32x64_two_tiles() {
        let data = index_matrix(32, 64);
        let t = tilize(32, 64, &data).unwrap();
        assert_eq!(t.tile_count(), 2);
        // Element (0, 32) opens tile 1.
        assert_eq!(t.data()[1024], data[32]);
        let map = layout_oracle(32, 64);
        for (flat, &src) in map.iter().enumerate() {
            assert_eq!(t.data()[flat], data[src], "flat index {flat}");
        }
    }

    #[test]
    fn constant_tile_is_unchanged() {
        let data = vec![Bf16::from_f32(3.5); 1024];
        let t = tilize(32, 32, &data).unwrap();
        assert!(t.data().iter().all(|&v| v.to_f32() == 3.5));
    }

    #[test]
    fn misaligned_and_mismatched_inputs_error() {
        let misaligned = vec![Bf16::ZERO; 33 * 32];
        assert_eq!(
            tilize(33, 32, &misaligned),
            Err(TilingError::Misaligned { rows: 33, cols: 32 })
        );
        let short = vec![Bf16::ZERO; 100];
        assert_eq!(
            tilize(32, 32, &short),
            Err(TilingError::LengthMismatch {
                rows: 32,
                cols: 32,
                len: 100
            })
        );
        let t = TileBuffer::zeros(1, 1);
        assert_eq!(
            untilize(&t, 33, 16),
            Err(TilingError::BoundsExceeded {
                rows: 33,
                cols: 16,
                max_rows: 32,
                max_cols: 32
            })
        );
    }

    #[test]
    fn pad_preserves_logical_region() {
        let g = index_matrix(8, 8);
        let p = pad_to_tiles(8, 8, &g).unwrap();
        assert_eq!((p.padded_rows(), p.padded_cols()), (32, 32));
        let zeros = p.data().iter().filter(|v| v.to_bits() == 0).count();
        assert_eq!(zeros, 960 + g.iter().filter(|v| v.to_bits() == 0).count());
        for r in 0..8 {
            for c in 0..8 {
                assert_eq!(p.get(r, c), g[r * 8 + c]);
            }
        }
    }

    #[test]
    fn pad_33x1_reaches_64x32() {
        let data = vec![Bf16::ONE; 33];
        let p = pad_to_tiles(33, 1, &data).unwrap();
        assert_eq!((p.padded_rows(), p.padded_cols()), (64, 32));
        // Ceiling-formula oracle.
        assert_eq!(
            p.data().len(),
            33usize.div_ceil(32) * 1usize.div_ceil(32) * 1024
        );
    }

    #[test]
    fn pad_aligned_input_is_identity() {
        let data = index_matrix(32, 32);
        let p = pad_to_tiles(32, 32, &data).unwrap();
        assert_eq!(p.data(), &data[..]);
    }

    #[test]
    fn conversion_cost_is_linear() {
        let spec = MachineSpec::default();
        assert_eq!(cpu_conversion_cost(0, &spec), 0.0);
        let mut spec2 = spec;
        spec2.tilize_throughput_elems_per_s = 1e9;
        assert_eq!(cpu_conversion_cost(1_000_000_000, &spec2), 1.0);
    }

    #[test]
    fn round_trip_with_padding_recovers_8x8() {
        let g = index_matrix(8, 8);
        let p = pad_to_tiles(8, 8, &g).unwrap();
        let t = tilize(p.padded_rows(), p.padded_cols(), p.data()).unwrap();
        let back = untilize(&t, 8, 8).unwrap();
        assert_eq!(back, g);
    }

    proptest! {
        #[test]
        fn prop_tilize_bijective_on_aligned_shapes(
            tile_rows in 1usize..=8,
            tile_cols in 1usize..=8,
            seed in any::<u64>(),
        ) {
            let rows = tile_rows * TILE_DIM;
            let cols = tile_cols * TILE_DIM;
            let mut s = seed | 1;
            let data: Vec<Bf16> = (0..rows * cols)
                .map(|_| {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                    Bf16::from_f32((s >> 40) as f32 / (1u32 << 24) as f32)
                })
                .collect();
            let t = tilize(rows, cols, &data).unwrap();
            prop_assert_eq!(untilize(&t, rows, cols).unwrap(), data.clone());

            // Value multiset is preserved: compare bit-pattern checksums.
            let sum_in: u64 = data.iter().map(|v| v.to_bits() as u64).sum();
            let sum_out: u64 = t.data().iter().map(|v| v.to_bits() as u64).sum();
            prop_assert_eq!(sum_in, sum_out);
        }

        #[test]
        fn prop_pad_is_idempotent(rows in 1usize..80, cols in 1usize..80) {
            let data = vec![Bf16::ONE; rows * cols];
            let once = pad_to_tiles(rows, cols, &data).unwrap();
            let twice =
                pad_to_tiles(once.padded_rows(), once.padded_cols(), once.data()).unwrap();
            prop_assert_eq!(twice.data(), once.data());
            prop_assert_eq!(
                once.data().len(),
                rows.div_ceil(32) * cols.div_ceil(32) * 1024
            );
        }
    }
}
