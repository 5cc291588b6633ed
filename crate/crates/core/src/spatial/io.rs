//! Map export: RGB PNG, an 8-bit 0/255 mask PNG and a JSON sidecar.

use std::io::Cursor;
use std::path::Path;

use image::{GrayImage, ImageFormat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::spatial::{Topology, WorldMap};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapSidecar {
    pub topology: Topology,
    pub width: usize,
    pub height: usize,
    /// World coordinate of raster pixel (0, 0).
    pub origin_offset: (i64, i64),
    pub player_pos: Option<(i64, i64)>,
}

impl WorldMap {
    pub fn sidecar(&self) -> MapSidecar {
        MapSidecar {
            topology: self.topology(),
            width: self.width(),
            height: self.height(),
            origin_offset: self.origin(),
            player_pos: self.player_pos(),
        }
    }

    pub fn image_png(&self) -> Result<Vec<u8>> {
        self.to_frame().to_png()
    }

    pub fn mask_png(&self) -> Result<Vec<u8>> {
        let data = self.observed_mask().iter().map(|&o| if o { 255 } else { 0 }).collect();
        let img = GrayImage::from_raw(self.width() as u32, self.height() as u32, data)
            .expect("mask matches map dimensions");
        let mut buf = Cursor::new(Vec::new());
        img.write_to(&mut buf, ImageFormat::Png)?;
        Ok(buf.into_inner())
    }

    pub fn from_png_parts(image: &[u8], mask: &[u8], sidecar: &MapSidecar) -> Result<Self> {
        let raster = Frame::from_png(image)?;
        let mask = image::load_from_memory_with_format(mask, ImageFormat::Png)?.to_luma8();
        let dims = (sidecar.width as u32, sidecar.height as u32);
        if (raster.width() as u32, raster.height() as u32) != dims || mask.dimensions() != dims {
            return Err(Error::ShapeMismatch(format!(
                "sidecar says {}x{}, images disagree",
                sidecar.width, sidecar.height
            )));
        }
        let observed = mask
            .into_raw()
            .into_iter()
            .map(|v| match v {
                0 => Ok(false),
                255 => Ok(true),
                other => Err(Error::Malformed(format!("mask value {other} is not 0 or 255"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        WorldMap::from_parts(
            sidecar.topology,
            raster,
            observed,
            sidecar.origin_offset,
            sidecar.player_pos,
        )
    }

    /// Writes `<stem>.png`, `<stem>_mask.png` and `<stem>.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::write(dir.join(format!("{stem}.png")), self.image_png()?)?;
        std::fs::write(dir.join(format!("{stem}_mask.png")), self.mask_png()?)?;
        let json = serde_json::to_string_pretty(&self.sidecar())?;
        std::fs::write(dir.join(format!("{stem}.json")), json)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>, stem: &str) -> Result<Self> {
        let dir = dir.as_ref();
        let sidecar: MapSidecar =
            serde_json::from_slice(&std::fs::read(dir.join(format!("{stem}.json")))?)?;
        let image = std::fs::read(dir.join(format!("{stem}.png")))?;
        let mask = std::fs::read(dir.join(format!("{stem}_mask.png")))?;
        Self::from_png_parts(&image, &mask, &sidecar)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::BandRect;

    #[test]
    fn save_load_is_bit_exact() {
        let mut m = WorldMap::new(Topology::Grid2D);
        let mut f = Frame::new(6, 4);
        f.fill_rect(1, 1, 3, 2, [33, 33, 222]);
        m.write(&f, (-3, 5), Some(BandRect { x: 0, y: 0, w: 2, h: 2 }));
        m.write(&Frame::filled(2, 2, [9, 8, 7]), (10, 10), None);
        m.set_player_pos((4, -2));
        let dir = tempfile::tempdir().unwrap();
        m.save(dir.path(), "gt_map").unwrap();
        assert_eq!(WorldMap::load(dir.path(), "gt_map").unwrap(), m);
    }

    #[test]
    fn non_binary_mask_is_rejected() {
        let m = WorldMap::fully_observed(Topology::Strip1D, Frame::new(2, 1), (0, 0), None);
        let img = GrayImage::from_raw(2, 1, vec![255, 7]).unwrap();
        let mut buf = Cursor::new(Vec::new());
        img.write_to(&mut buf, ImageFormat::Png).unwrap();
        let r = WorldMap::from_png_parts(&m.image_png().unwrap(), buf.get_ref(), &m.sidecar());
        assert!(matches!(r, Err(Error::Malformed(_))));
    }
}
