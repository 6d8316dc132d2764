//! Per-pixel contribution weights combining semantic confidence with an
//! externally supplied attention raster.
//!
//! Semantic labels come as an 8-bit raster with the palette in
//! [`SemanticLabel`]; attention maps are 8-bit grayscale scaled by 1/255.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;

/// Label palette of semantic rasters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SemanticLabel {
    Unknown,
    Ceiling,
    Floor,
    Wall,
    Clutter,
}

impl SemanticLabel {
    pub fn to_u8(self) -> u8 {
        match self {
            SemanticLabel::Unknown => 0,
            SemanticLabel::Ceiling => 1,
            SemanticLabel::Floor => 2,
            SemanticLabel::Wall => 3,
            SemanticLabel::Clutter => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SemanticLabel::Unknown => "unknown",
            SemanticLabel::Ceiling => "ceiling",
            SemanticLabel::Floor => "floor",
            SemanticLabel::Wall => "wall",
            SemanticLabel::Clutter => "clutter",
        }
    }
}

/// Label name -> confidence in [0, 1].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SemanticTable {
    entries: BTreeMap<String, f64>,
}

impl Default for SemanticTable {
    /// Layout structures contribute, everything else does not.
    fn default() -> Self {
        let mut entries = BTreeMap::new();
        entries.insert("ceiling".to_string(), 1.0);
        entries.insert("floor".to_string(), 1.0);
        entries.insert("wall".to_string(), 1.0);
        SemanticTable { entries }
    }
}

impl SemanticTable {
    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let table: SemanticTable = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.display().to_string(),
            source,
        })?;
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, &c) in &self.entries {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::domain(format!(
                    "confidence for '{name}' is {c}, outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Confidence of a palette value; labels absent from the table map to 0.
    fn lookup(&self, raw: u8) -> Option<f64> {
        let name = match raw {
            1 => "ceiling",
            2 => "floor",
            3 => "wall",
            4 => "clutter",
            _ => return None,
        };
        Some(self.entries.get(name).copied().unwrap_or(0.0))
    }
}

/// Result of a semantic lookup pass: the c_s raster plus how many pixels
/// carried labels outside the palette (those got confidence 0).
pub struct SemanticConfidence {
    pub c_s: Raster<f64>,
    pub unknown_pixels: usize,
}

/// Per-pixel table lookup of semantic confidence.
pub fn semantic_confidence(sem_map: &Raster<u8>, table: &SemanticTable) -> SemanticConfidence {
    let mut unknown_pixels = 0usize;
    let c_s = sem_map.map(|raw| match table.lookup(raw) {
        Some(c) => c,
        None => {
            unknown_pixels += 1;
            0.0
        }
    });
    if unknown_pixels > 0 {
        log::warn!("{unknown_pixels} pixels carry labels outside the semantic palette; confidence set to 0");
    }
    SemanticConfidence { c_s, unknown_pixels }
}

/// Per-pixel weights c = c_s * c_a.
#[derive(Debug, Clone)]
pub struct ConfidenceMap {
    c_s: Raster<f64>,
    c_a: Raster<f64>,
    c: Raster<f64>,
}

impl ConfidenceMap {
    /// Elementwise product of the two confidence rasters.
    pub fn combine(c_s: Raster<f64>, c_a: Raster<f64>) -> Result<Self> {
        if !c_s.same_shape(&c_a) {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", c_s.width(), c_s.height()),
                actual: format!("{}x{}", c_a.width(), c_a.height()),
            });
        }
        for (name, raster) in [("c_s", &c_s), ("c_a", &c_a)] {
            if raster.data().iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(Error::domain(format!("{name} has entries outside [0, 1]")));
            }
        }
        let data = c_s
            .data()
            .iter()
            .zip(c_a.data())
            .map(|(&s, &a)| s * a)
            .collect();
        let c = Raster::from_vec(c_s.width(), c_s.height(), data)?;
        Ok(ConfidenceMap { c_s, c_a, c })
    }

    /// Uniform weight 1 everywhere (the "no confidence" ablation arm).
    pub fn ones(width: usize, height: usize) -> Self {
        let ones = Raster::filled(width, height, 1.0);
        ConfidenceMap {
            c_s: ones.clone(),
            c_a: ones.clone(),
            c: ones,
        }
    }

    pub fn c_s(&self) -> &Raster<f64> {
        &self.c_s
    }

    pub fn c_a(&self) -> &Raster<f64> {
        &self.c_a
    }

    pub fn c(&self) -> &Raster<f64> {
        &self.c
    }

    #[inline]
    pub fn weight(&self, u: usize, v: usize) -> f64 {
        self.c.get(u, v)
    }

    pub fn width(&self) -> usize {
        self.c.width()
    }

    pub fn height(&self) -> usize {
        self.c.height()
    }
}

/// Read an 8-bit grayscale attention PNG as confidences value/255.
pub fn load_attention<P: AsRef<Path>>(path: P) -> Result<Raster<f64>> {
    let gray = Raster::<u8>::read_gray_png(path)?;
    Ok(gray.map(|x| x as f64 / 255.0))
}
