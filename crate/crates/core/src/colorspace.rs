//! Color representations and conversions.
//!
//! Pixel intensities are kept in their nonlinear (gamma-encoded) sRGB form
//! exactly as stored in the file; the CMY channels used for curve estimation
//! are the componentwise complement of those values. Linearization happens
//! only inside the sRGB → XYZ step when converting to the perceptual spaces
//! (CIELAB / CIELUV, D65 white point).

use std::fmt;

/// One of the three subtractive dye channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Cyan,
    Magenta,
    Yellow,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Cyan, Channel::Magenta, Channel::Yellow];

    /// Index into `[cyan, magenta, yellow]` arrays; also the index of the
    /// complementary RGB channel (cyan ↔ red, magenta ↔ green, yellow ↔ blue).
    pub fn index(self) -> usize {
        match self {
            Channel::Cyan => 0,
            Channel::Magenta => 1,
            Channel::Yellow => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Cyan => "cyan",
            Channel::Magenta => "magenta",
            Channel::Yellow => "yellow",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Nonlinear sRGB intensities, each in [0, 1]. Constructors clamp.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RgbTriple {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl RgbTriple {
    pub fn new(r: f64, g: f64, b: f64) -> Self {
        RgbTriple {
            r: r.clamp(0.0, 1.0),
            g: g.clamp(0.0, 1.0),
            b: b.clamp(0.0, 1.0),
        }
    }

    pub fn component(&self, i: usize) -> f64 {
        [self.r, self.g, self.b][i]
    }
}

/// Subtractive dye amounts, each in [0, 1]. Componentwise complement of RGB.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CmyTriple {
    pub c: f64,
    pub m: f64,
    pub y: f64,
}

impl CmyTriple {
    pub fn new(c: f64, m: f64, y: f64) -> Self {
        CmyTriple {
            c: c.clamp(0.0, 1.0),
            m: m.clamp(0.0, 1.0),
            y: y.clamp(0.0, 1.0),
        }
    }

    pub fn component(&self, i: usize) -> f64 {
        [self.c, self.m, self.y][i]
    }
}

/// CIELAB coordinates: lightness L in [0, 100], opponent axes a and b.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabColor {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

/// CIELUV coordinates: lightness L in [0, 100], chromaticity axes u and v.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LuvColor {
    pub l: f64,
    pub u: f64,
    pub v: f64,
}

/// Spaces in which per-pixel Euclidean distances are measured. The `Uv` and
/// `Ab` variants use the CIELUV / CIELAB chromatic coordinates without the
/// lightness component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DistanceSpace {
    CieLuv,
    Uv,
    CieLab,
    Ab,
}

impl DistanceSpace {
    pub const ALL: [DistanceSpace; 4] = [
        DistanceSpace::CieLuv,
        DistanceSpace::Uv,
        DistanceSpace::CieLab,
        DistanceSpace::Ab,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistanceSpace::CieLuv => "CIELUV",
            DistanceSpace::Uv => "UV",
            DistanceSpace::CieLab => "CIELAB",
            DistanceSpace::Ab => "AB",
        }
    }
}

impl fmt::Display for DistanceSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

// sRGB linear-light → XYZ matrix and D65 white point, derived at high
// precision from the IEC 61966-2-1 primaries (0.640,0.330)(0.300,0.600)
// (0.150,0.060) and the D65 chromaticity (0.3127, 0.3290).
const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4123907992659595, 0.35758433938387796, 0.1804807884018343],
    [0.21263900587151036, 0.7151686787677559, 0.07219231536073371],
    [0.01933081871559185, 0.11919477979462599, 0.9505321522496606],
];

const XYZ_TO_SRGB: [[f64; 3]; 3] = [
    [3.2409699419045213, -1.5373831775700935, -0.4986107602930033],
    [-0.9692436362808798, 1.8759675015077206, 0.04155505740717561],
    [
        0.05563007969699361,
        -0.20397695888897656,
        1.0569715142428786,
    ],
];

const WHITE_X: f64 = 0.9504559270516717;
const WHITE_Y: f64 = 1.0;
const WHITE_Z: f64 = 1.0890577507598784;

// CIE thresholds, exact rationals.
const CIE_EPSILON: f64 = 216.0 / 24389.0;
const CIE_KAPPA: f64 = 24389.0 / 27.0;

/// CMY is the complement of RGB: each dye amount is one minus the
/// corresponding stored intensity.
pub fn rgb_to_cmy(p: RgbTriple) -> CmyTriple {
    CmyTriple {
        c: 1.0 - p.r,
        m: 1.0 - p.g,
        y: 1.0 - p.b,
    }
}

/// Exact inverse of [`rgb_to_cmy`].
pub fn cmy_to_rgb(p: CmyTriple) -> RgbTriple {
    RgbTriple {
        r: 1.0 - p.c,
        g: 1.0 - p.m,
        b: 1.0 - p.y,
    }
}

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.0031308 {
        c * 12.92
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn rgb_to_xyz(p: RgbTriple) -> [f64; 3] {
    let lin = [
        srgb_to_linear(p.r),
        srgb_to_linear(p.g),
        srgb_to_linear(p.b),
    ];
    let mut xyz = [0.0; 3];
    for (row, out) in SRGB_TO_XYZ.iter().zip(xyz.iter_mut()) {
        *out = row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2];
    }
    xyz
}

/// sRGB → XYZ (D65) → CIELAB.
pub fn rgb_to_lab(p: RgbTriple) -> LabColor {
    let [x, y, z] = rgb_to_xyz(p);
    let f = |t: f64| {
        if t > CIE_EPSILON {
            t.cbrt()
        } else {
            (CIE_KAPPA * t + 16.0) / 116.0
        }
    };
    let fx = f(x / WHITE_X);
    let fy = f(y / WHITE_Y);
    let fz = f(z / WHITE_Z);
    LabColor {
        l: 116.0 * fy - 16.0,
        a: 500.0 * (fx - fy),
        b: 200.0 * (fy - fz),
    }
}

/// sRGB → XYZ (D65) → CIELUV.
pub fn rgb_to_luv(p: RgbTriple) -> LuvColor {
    let [x, y, z] = rgb_to_xyz(p);
    let dw = WHITE_X + 15.0 * WHITE_Y + 3.0 * WHITE_Z;
    let upw = 4.0 * WHITE_X / dw;
    let vpw = 9.0 * WHITE_Y / dw;

    let d = x + 15.0 * y + 3.0 * z;
    // Black has no chromaticity; use the white point's u'v' so u = v = 0.
    let (up, vp) = if d > 0.0 {
        (4.0 * x / d, 9.0 * y / d)
    } else {
        (upw, vpw)
    };

    let yr = y / WHITE_Y;
    let l = if yr > CIE_EPSILON {
        116.0 * yr.cbrt() - 16.0
    } else {
        CIE_KAPPA * yr
    };
    LuvColor {
        l,
        u: 13.0 * l * (up - upw),
        v: 13.0 * l * (vp - vpw),
    }
}

/// CIELAB → XYZ (D65) → sRGB. Out-of-gamut results are clamped to [0, 1];
/// used for constructing fixtures, not part of the estimation path.
pub fn lab_to_rgb(c: LabColor) -> RgbTriple {
    let fy = (c.l + 16.0) / 116.0;
    let fx = fy + c.a / 500.0;
    let fz = fy - c.b / 200.0;
    let finv = |t: f64| {
        let t3 = t * t * t;
        if t3 > CIE_EPSILON {
            t3
        } else {
            (116.0 * t - 16.0) / CIE_KAPPA
        }
    };
    let xyz = [finv(fx) * WHITE_X, finv(fy) * WHITE_Y, finv(fz) * WHITE_Z];
    let mut lin = [0.0; 3];
    for (row, out) in XYZ_TO_SRGB.iter().zip(lin.iter_mut()) {
        *out = row[0] * xyz[0] + row[1] * xyz[1] + row[2] * xyz[2];
    }
    RgbTriple::new(
        linear_to_srgb(lin[0].clamp(0.0, 1.0)),
        linear_to_srgb(lin[1].clamp(0.0, 1.0)),
        linear_to_srgb(lin[2].clamp(0.0, 1.0)),
    )
}

/// Euclidean distance between two pixels in the chosen space.
pub fn pixel_pair_distance(a: RgbTriple, b: RgbTriple, space: DistanceSpace) -> f64 {
    match space {
        DistanceSpace::CieLuv => {
            let (p, q) = (rgb_to_luv(a), rgb_to_luv(b));
            ((p.l - q.l).powi(2) + (p.u - q.u).powi(2) + (p.v - q.v).powi(2)).sqrt()
        }
        DistanceSpace::Uv => {
            let (p, q) = (rgb_to_luv(a), rgb_to_luv(b));
            ((p.u - q.u).powi(2) + (p.v - q.v).powi(2)).sqrt()
        }
        DistanceSpace::CieLab => {
            let (p, q) = (rgb_to_lab(a), rgb_to_lab(b));
            ((p.l - q.l).powi(2) + (p.a - q.a).powi(2) + (p.b - q.b).powi(2)).sqrt()
        }
        DistanceSpace::Ab => {
            let (p, q) = (rgb_to_lab(a), rgb_to_lab(b));
            ((p.a - q.a).powi(2) + (p.b - q.b).powi(2)).sqrt()
        }
    }
}
