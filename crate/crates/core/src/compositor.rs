//! Sort-last depth compositing of worker tiles.
//!
//! A pixel's winner is the smaller `(depth, provenance)` pair. Because that is
//! a total order, folding tiles in any arrival order gives the same image, and
//! an all-background tile is the identity.

use std::cmp::Ordering;

use thiserror::Error;

use crate::raster::FrameTile;

#[derive(Debug, Error, PartialEq)]
pub enum CompositeError {
    #[error("tile size {got:?} does not match {expected:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        got: (u32, u32),
    },
    #[error("no tiles to composite")]
    Empty,
}

#[inline]
fn beats(depth_a: f32, prov_a: u16, depth_b: f32, prov_b: u16) -> bool {
    match depth_a.total_cmp(&depth_b) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => prov_a < prov_b,
    }
}

/// Composites `incoming` into `acc` in place.
pub fn composite_into(acc: &mut FrameTile, incoming: &FrameTile) -> Result<(), CompositeError> {
    let expected = (acc.width(), acc.height());
    let got = (incoming.width(), incoming.height());
    if expected != got {
        return Err(CompositeError::DimensionMismatch { expected, got });
    }
    for i in 0..acc.pixel_count() {
        if beats(
            incoming.depth[i],
            incoming.provenance[i],
            acc.depth[i],
            acc.provenance[i],
        ) {
            acc.color[i] = incoming.color[i];
            acc.depth[i] = incoming.depth[i];
            acc.provenance[i] = incoming.provenance[i];
        }
    }
    Ok(())
}

pub fn composite_pair(acc: &FrameTile, incoming: &FrameTile) -> Result<FrameTile, CompositeError> {
    let mut out = acc.clone();
    composite_into(&mut out, incoming)?;
    Ok(out)
}

/// Left fold of [`composite_pair`] over `tiles` in the given order.
pub fn composite_all<'a, I>(tiles: I) -> Result<FrameTile, CompositeError>
where
    I: IntoIterator<Item = &'a FrameTile>,
{
    let mut it = tiles.into_iter();
    let mut acc = it.next().ok_or(CompositeError::Empty)?.clone();
    for t in it {
        composite_into(&mut acc, t)?;
    }
    Ok(acc)
}
