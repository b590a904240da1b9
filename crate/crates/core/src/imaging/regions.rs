//! Connected-component extraction of per-bean regions from a segmented
//! snapshot, and bean cropping.

use crate::error::Result;
use crate::imaging::{
    segment_mask, BeanRegion, BoundingBox, Connectivity, Mask, MaskedBean, RgbImage,
    SegmentationConfig,
};

const NEIGHBORS_4: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
const NEIGHBORS_8: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Segment the image and return its bean regions: connected components of
/// the bean mask, size-filtered to `[min_region_pixels, max_region_pixels]`
/// and ordered by bounding-box (y0, x0) scan order.
pub fn find_bean_regions(
    img: &RgbImage,
    cfg: &SegmentationConfig,
    image_id: &str,
) -> Result<Vec<BeanRegion>> {
    cfg.validate()?;
    let mask = segment_mask(img, cfg);
    let (w, h) = (mask.width(), mask.height());
    let neighbors: &[(isize, isize)] = match cfg.connectivity {
        Connectivity::Four => &NEIGHBORS_4,
        Connectivity::Eight => &NEIGHBORS_8,
    };

    let mut visited = vec![false; w * h];
    let mut regions = Vec::new();
    let mut stack = Vec::new();
    let mut component = Vec::new();

    for start in 0..w * h {
        if visited[start] || !mask.cells()[start] {
            continue;
        }
        // Flood fill one component.
        component.clear();
        visited[start] = true;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            component.push(idx);
            let (x, y) = (idx % w, idx / w);
            for &(dx, dy) in neighbors {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                    continue;
                }
                let nidx = ny as usize * w + nx as usize;
                if !visited[nidx] && mask.cells()[nidx] {
                    visited[nidx] = true;
                    stack.push(nidx);
                }
            }
        }
        if component.len() < cfg.min_region_pixels || component.len() > cfg.max_region_pixels {
            continue;
        }

        let mut x0 = w;
        let mut y0 = h;
        let mut x1 = 0usize;
        let mut y1 = 0usize;
        for &idx in &component {
            let (x, y) = (idx % w, idx / w);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        let bbox = BoundingBox {
            x0,
            y0,
            width: x1 - x0 + 1,
            height: y1 - y0 + 1,
        };
        let mut local = Mask::new_false(bbox.width, bbox.height);
        for &idx in &component {
            let (x, y) = (idx % w, idx / w);
            local.set(x - x0, y - y0, true);
        }
        regions.push(BeanRegion {
            bounding_box: bbox,
            pixel_count: component.len(),
            mask: local,
            source_image_id: image_id.to_string(),
        });
    }

    // Stable sort keeps discovery (scan) order for bounding boxes that
    // share an origin, so the output order is fully deterministic.
    regions.sort_by_key(|r| (r.bounding_box.y0, r.bounding_box.x0));
    Ok(regions)
}

/// Cut the region's bounding box out of the source image, keeping the
/// region mask so downstream statistics skip background pixels.
pub fn crop_bean(img: &RgbImage, region: &BeanRegion) -> Result<MaskedBean> {
    let b = &region.bounding_box;
    let image = img.crop(b.x0, b.y0, b.width, b.height)?;
    Ok(MaskedBean {
        id: region.source_image_id.clone(),
        image,
        mask: region.mask.clone(),
    })
}
