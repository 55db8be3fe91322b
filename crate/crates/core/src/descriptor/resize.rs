use crate::error::{Error, Result};

/// Output size for an image resized so its longer side equals
/// `target_long_side`, keeping the aspect ratio (shorter side rounded half
/// up, never below one pixel).
pub fn resize_plan(width: u32, height: u32, target_long_side: u32) -> Result<(u32, u32)> {
    if width == 0 || height == 0 || target_long_side == 0 {
        return Err(Error::invalid(format!(
            "image dimensions must be positive, got {width}x{height} -> {target_long_side}"
        )));
    }
    let scale_short = |short: u32, long: u32| -> u32 {
        let (s, l, t) = (
            u64::from(short),
            u64::from(long),
            u64::from(target_long_side),
        );
        ((2 * s * t + l) / (2 * l)).max(1) as u32
    };
    Ok(if width >= height {
        (target_long_side, scale_short(height, width))
    } else {
        (scale_short(width, height), target_long_side)
    })
}
