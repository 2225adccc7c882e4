use thiserror::Error;

use super::rle::Rle;

/// Inclusive pixel bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BBox {
    pub u_min: u32,
    pub v_min: u32,
    pub u_max: u32,
    pub v_max: u32,
}

impl BBox {
    pub fn from_array([u_min, v_min, u_max, v_max]: [u32; 4]) -> Self {
        Self {
            u_min,
            v_min,
            u_max,
            v_max,
        }
    }

    pub fn area(&self) -> u64 {
        (self.u_max - self.u_min + 1) as u64 * (self.v_max - self.v_min + 1) as u64
    }

    pub fn intersects(&self, o: &BBox) -> bool {
        self.u_min <= o.u_max
            && o.u_min <= self.u_max
            && self.v_min <= o.v_max
            && o.v_min <= self.v_max
    }

    pub fn iou(&self, o: &BBox) -> f64 {
        if !self.intersects(o) {
            return 0.0;
        }
        let w = (self.u_max.min(o.u_max) - self.u_min.max(o.u_min) + 1) as u64;
        let h = (self.v_max.min(o.v_max) - self.v_min.max(o.v_min) + 1) as u64;
        let inter = w * h;
        inter as f64 / (self.area() + o.area() - inter) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("mask is empty")]
    EmptyMask,
    #[error("bounding box does not match the mask extent")]
    BBoxMismatch,
    #[error("score outside [0, 100]")]
    ScoreOutOfRange,
}

/// One prompt's mask in one frame. Scores use a 0–100 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskRecord {
    pub frame_id: u32,
    pub prompt_id: u32,
    pub mask: Rle,
    pub bbox: BBox,
    pub predicted_iou: f32,
    pub stability: f32,
}

impl MaskRecord {
    /// Builds a record with the tight bounding box of `mask`.
    pub fn new(
        frame_id: u32,
        prompt_id: u32,
        mask: Rle,
        predicted_iou: f32,
        stability: f32,
    ) -> Result<Self, RecordError> {
        let bbox = mask
            .bbox()
            .map(BBox::from_array)
            .ok_or(RecordError::EmptyMask)?;
        let r = Self {
            frame_id,
            prompt_id,
            mask,
            bbox,
            predicted_iou,
            stability,
        };
        r.check_scores()?;
        Ok(r)
    }

    /// Full invariant check, for records read from outside.
    pub fn validate(&self) -> Result<(), RecordError> {
        let tight = self
            .mask
            .bbox()
            .map(BBox::from_array)
            .ok_or(RecordError::EmptyMask)?;
        if tight != self.bbox {
            return Err(RecordError::BBoxMismatch);
        }
        self.check_scores()
    }

    fn check_scores(&self) -> Result<(), RecordError> {
        let ok = |s: f32| (0.0..=100.0).contains(&s);
        if ok(self.predicted_iou) && ok(self.stability) {
            Ok(())
        } else {
            Err(RecordError::ScoreOutOfRange)
        }
    }

    pub fn contains_pixel(&self, u: i32, v: i32) -> bool {
        u >= 0 && v >= 0 && self.mask.contains(u as u32, v as u32)
    }
}
