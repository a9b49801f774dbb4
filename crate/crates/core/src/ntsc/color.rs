use super::{RgbFrame, HEIGHT, WIDTH};

/// Luminance and the two chrominance axes, with RGB scaled to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Yiq {
    pub y: f64,
    pub i: f64,
    pub q: f64,
}

impl Yiq {
    pub const BLACK: Yiq = Yiq {
        y: 0.0,
        i: 0.0,
        q: 0.0,
    };

    pub fn saturation(&self) -> f64 {
        self.i.hypot(self.q)
    }
}

const FORWARD: [[f64; 3]; 3] = [
    [0.299, 0.587, 0.114],
    [0.596, -0.274, -0.322],
    [0.211, -0.523, 0.312],
];

const INVERSE: [[f64; 3]; 3] = [
    [1.0, 0.956_170_685_404_145_1, 0.621_432_566_346_585_5],
    [1.0, -0.272_688_602_330_106_3, -0.646_813_237_020_173_9],
    [1.0, -1.103_744_082_176_026_3, 1.700_623_094_677_306_2],
];

/// Largest chroma magnitude reachable inside the RGB cube (pure red or cyan).
pub const MAX_SATURATION: f64 = 0.632_247_578_089_469_6;

pub fn rgb_to_yiq(rgb: [u8; 3]) -> Yiq {
    let c = rgb.map(|v| v as f64 / 255.0);
    let row = |m: [f64; 3]| m[0] * c[0] + m[1] * c[1] + m[2] * c[2];
    Yiq {
        y: row(FORWARD[0]),
        i: row(FORWARD[1]),
        q: row(FORWARD[2]),
    }
}

/// Inverse transform, clamped and rounded to 8 bits.
pub fn yiq_to_rgb(p: Yiq) -> [u8; 3] {
    INVERSE.map(|m| {
        let v = m[0] * p.y + m[1] * p.i + m[2] * p.q;
        (v * 255.0).round().clamp(0.0, 255.0) as u8
    })
}

/// Chroma phase in degrees, measured from the +Q axis towards +I.
pub fn hue_degrees(p: Yiq) -> f64 {
    p.i.atan2(p.q).to_degrees()
}

/// Width in pixels of the raised-cosine transition between test-pattern
/// segments (about 0.56 us), which keeps bar edges inside the chroma band.
pub const BAR_EDGE_PIXELS: f64 = 8.0;

/// Colour at pixel `col` of a row made of equal-width segments, blending
/// neighbours over [`BAR_EDGE_PIXELS`] around each boundary.
fn soft_segments(col: usize, colors: &[[u8; 3]]) -> [u8; 3] {
    let width = WIDTH as f64 / colors.len() as f64;
    let x = col as f64 + 0.5;
    let k = ((x / width) as usize).min(colors.len() - 1);
    let (left, right, d) = {
        let to_start = x - k as f64 * width;
        let to_end = (k + 1) as f64 * width - x;
        if to_start < to_end && k > 0 {
            (colors[k - 1], colors[k], to_start)
        } else if k + 1 < colors.len() {
            (colors[k], colors[k + 1], -to_end)
        } else {
            return colors[k];
        }
    };
    if d.abs() >= 0.5 * BAR_EDGE_PIXELS {
        return colors[k];
    }
    let w = 0.5 + 0.5 * (std::f64::consts::PI * d / BAR_EDGE_PIXELS).sin();
    std::array::from_fn(|c| ((1.0 - w) * left[c] as f64 + w * right[c] as f64).round() as u8)
}

/// SMPTE-style test pattern: seven 75 % bars, a reverse castellation strip
/// and a bottom row with -I, white, +Q and a near-black pluge. Segment
/// edges are band-limited.
pub fn color_bars() -> RgbFrame {
    const L: u8 = 191;
    const K: [u8; 3] = [19, 19, 19];
    let bars = [
        [L, L, L],
        [L, L, 0],
        [0, L, L],
        [0, L, 0],
        [L, 0, L],
        [L, 0, 0],
        [0, 0, L],
    ];
    let castellation = [[0, 0, L], K, [L, 0, L], K, [0, L, L], K, [L, L, L]];
    let minus_i = [0, 33, 76];
    let plus_q = [50, 0, 106];
    let white = [255; 3];
    let bottom = [
        minus_i, minus_i, minus_i, white, white, white, plus_q, plus_q, plus_q, K, K, K, [9; 3], K, [29; 3],
        K, K, K,
    ];
    let top = HEIGHT * 2 / 3;
    let middle = HEIGHT * 3 / 4;
    let rows = [bars.as_slice(), castellation.as_slice(), bottom.as_slice()]
        .map(|seg| (0..WIDTH).map(|col| soft_segments(col, seg)).collect::<Vec<_>>());
    RgbFrame::from_fn(|col, row| {
        let section = if row < top {
            0
        } else if row < middle {
            1
        } else {
            2
        };
        rows[section][col]
    })
}
