//! Procedural garment footprints. Sizes are in cells at the default 2 cm
//! resolution and are picked so that most garments can be lifted from near
//! their center by one arm while long ones (scarves, dresses grasped at the
//! hem) need a second grasp.

use rand::Rng;

use super::{Category, ShapeClass};
use crate::grid::Cell;
use crate::rng::SimRng;

fn rect(x0: i32, y0: i32, w: i32, h: i32, out: &mut Vec<Cell>) {
    for y in y0..y0 + h {
        for x in x0..x0 + w {
            out.push(Cell::new(x, y));
        }
    }
}

fn trapezoid(top: i32, bottom: i32, h: i32, out: &mut Vec<Cell>) {
    let max_w = top.max(bottom);
    for y in 0..h {
        let t = if h > 1 { y as f64 / (h - 1) as f64 } else { 0.0 };
        let w = (top as f64 + (bottom - top) as f64 * t).round() as i32;
        let x0 = (max_w - w) / 2;
        for x in x0..x0 + w {
            out.push(Cell::new(x, y));
        }
    }
}

fn shape_cells(category: Category, rng: &mut SimRng) -> (ShapeClass, Vec<Cell>) {
    let mut cells = Vec::new();
    let shape = match category {
        Category::Tops => {
            let w = rng.gen_range(8..=11);
            let h = rng.gen_range(9..=12);
            let sleeve = rng.gen_range(3..=5);
            rect(sleeve, 0, w, h, &mut cells);
            rect(0, 0, sleeve, 3, &mut cells);
            rect(sleeve + w, 0, sleeve, 3, &mut cells);
            ShapeClass::TShape
        }
        Category::Dress => {
            let top = rng.gen_range(6..=8);
            let bottom = rng.gen_range(12..=16);
            let h = rng.gen_range(18..=24);
            trapezoid(top, bottom, h, &mut cells);
            ShapeClass::Trapezoid
        }
        Category::Skirt => {
            let top = rng.gen_range(7..=9);
            let bottom = rng.gen_range(12..=14);
            let h = rng.gen_range(8..=11);
            trapezoid(top, bottom, h, &mut cells);
            ShapeClass::Trapezoid
        }
        Category::Trousers => {
            let leg_w = rng.gen_range(4..=5);
            let gap = 2;
            let waist_h = 3;
            let leg_h = rng.gen_range(16..=22);
            let w = 2 * leg_w + gap;
            rect(0, 0, w, waist_h, &mut cells);
            rect(0, waist_h, leg_w, leg_h, &mut cells);
            rect(leg_w + gap, waist_h, leg_w, leg_h, &mut cells);
            ShapeClass::TwoLeg
        }
        Category::Socks => {
            let leg_h = rng.gen_range(8..=10);
            let foot = rng.gen_range(3..=4);
            rect(0, 0, 3, leg_h, &mut cells);
            rect(3, leg_h - 3, foot, 3, &mut cells);
            ShapeClass::LShape
        }
        Category::Glove => {
            rect(0, 3, 5, 6, &mut cells);
            for f in 0..3 {
                rect(f * 2, 0, 1, 3, &mut cells);
            }
            rect(5, 5, 2, 1, &mut cells);
            ShapeClass::Palm
        }
        Category::Hat => {
            let r: i32 = rng.gen_range(3..=4);
            for y in -r..=r {
                for x in -r..=r {
                    if x * x + y * y <= r * r + r / 2 {
                        cells.push(Cell::new(x + r, y + r));
                    }
                }
            }
            ShapeClass::Disk
        }
        Category::Scarf => {
            let w = rng.gen_range(2..=3);
            let len = rng.gen_range(26..=40);
            rect(0, 0, w, len, &mut cells);
            ShapeClass::Strip
        }
        Category::Underpants => {
            let w = rng.gen_range(7..=9);
            let h = rng.gen_range(5..=6);
            rect(0, 0, w, h, &mut cells);
            let notch = (w / 3).max(1);
            let x0 = (w - notch) / 2;
            cells.retain(|c| !(c.y >= h - 2 && c.x >= x0 && c.x < x0 + notch));
            ShapeClass::Notched
        }
    };
    (shape, cells)
}

/// Generates a footprint for `category`, randomly rotated by a multiple of 90
/// degrees and optionally mirrored, normalized so its bounding box starts at
/// the origin. Cells are row-major sorted.
pub(super) fn generate_footprint(category: Category, rng: &mut SimRng) -> (ShapeClass, Vec<Cell>) {
    let (shape, mut cells) = shape_cells(category, rng);
    let rot = rng.gen_range(0..4);
    let mirror: bool = rng.gen();
    for c in cells.iter_mut() {
        let (mut x, y) = (c.x, c.y);
        if mirror {
            x = -x;
        }
        let (x, y) = match rot {
            0 => (x, y),
            1 => (-y, x),
            2 => (-x, -y),
            _ => (y, -x),
        };
        *c = Cell::new(x, y);
    }
    let min_x = cells.iter().map(|c| c.x).min().unwrap_or(0);
    let min_y = cells.iter().map(|c| c.y).min().unwrap_or(0);
    for c in cells.iter_mut() {
        *c = c.offset(-min_x, -min_y);
    }
    cells.sort_by_key(|c| (c.y, c.x));
    cells.dedup();
    (shape, cells)
}
