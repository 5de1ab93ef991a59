use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GridShape, Point};

/// Number of semantic classes a segmented map may use.
pub const CLASS_COUNT: usize = 14;

/// Default labels for the urban semantic classes.
pub const DEFAULT_CLASS_NAMES: [&str; CLASS_COUNT] = [
    "road",
    "sidewalk",
    "building",
    "wall",
    "fence",
    "pole",
    "vegetation",
    "terrain",
    "grass",
    "water",
    "vehicle",
    "stairs",
    "furniture",
    "other",
];

/// Classes treated as obstacles when none are given: building, wall, fence, pole.
pub const DEFAULT_OBSTACLE_CLASSES: [u8; 4] = [2, 3, 4, 5];

/// Semantic-class raster of the search area.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentedMap {
    pub shape: GridShape,
    pub classes: Vec<u8>,
    pub class_names: Vec<String>,
}

impl SegmentedMap {
    pub fn new(shape: GridShape, classes: Vec<u8>, class_names: Vec<String>) -> Result<Self> {
        let map = SegmentedMap {
            shape,
            classes,
            class_names,
        };
        map.validate()?;
        Ok(map)
    }

    /// Map with every cell set to `class`, default class names.
    pub fn filled(shape: GridShape, class: u8) -> Result<Self> {
        Self::new(shape, vec![class; shape.len()], default_class_names())
    }

    pub fn validate(&self) -> Result<()> {
        if self.shape.is_empty() {
            return Err(Error::Validation("map must have at least one cell".into()));
        }
        if !(self.shape.resolution > 0.0 && self.shape.resolution.is_finite()) {
            return Err(Error::Validation(format!(
                "resolution must be positive, got {}",
                self.shape.resolution
            )));
        }
        if self.classes.len() != self.shape.len() {
            return Err(Error::Validation(format!(
                "expected {} class ids, found {}",
                self.shape.len(),
                self.classes.len()
            )));
        }
        if self.class_names.len() != CLASS_COUNT {
            return Err(Error::Validation(format!(
                "expected {CLASS_COUNT} class names, found {}",
                self.class_names.len()
            )));
        }
        if let Some((i, c)) = self
            .classes
            .iter()
            .enumerate()
            .find(|(_, &c)| c as usize >= CLASS_COUNT)
        {
            return Err(Error::Validation(format!(
                "cell {i} has class id {c}, must be < {CLASS_COUNT}"
            )));
        }
        Ok(())
    }

    pub fn class_at(&self, p: Point) -> Option<u8> {
        self.shape.cell_of(p).map(|i| self.classes[i])
    }
}

pub fn default_class_names() -> Vec<String> {
    DEFAULT_CLASS_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Free/obstacle raster derived from a [`SegmentedMap`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    #[serde(flatten)]
    pub shape: GridShape,
    pub occupied: Vec<bool>,
}

impl OccupancyGrid {
    pub fn free(shape: GridShape) -> Self {
        OccupancyGrid {
            shape,
            occupied: vec![false; shape.len()],
        }
    }

    pub fn is_occupied(&self, cell: usize) -> bool {
        self.occupied[cell]
    }

    /// `true` when `p` lies inside the map on a free cell.
    pub fn is_free_at(&self, p: Point) -> bool {
        self.shape.cell_of(p).is_some_and(|c| !self.occupied[c])
    }

    pub fn free_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| !o).count()
    }

    /// `true` when the straight segment `a → b` crosses no occupied cell.
    pub fn line_of_sight(&self, a: Point, b: Point) -> bool {
        crate::geometry::traverse_segment(&self.shape, a, b, |c| !self.occupied[c])
    }
}

/// Cell occupied iff its class is in `obstacle_classes`.
pub fn derive_occupancy(map: &SegmentedMap, obstacle_classes: &BTreeSet<u8>) -> OccupancyGrid {
    OccupancyGrid {
        shape: map.shape,
        occupied: map
            .classes
            .iter()
            .map(|c| obstacle_classes.contains(c))
            .collect(),
    }
}

#[derive(Serialize, Deserialize)]
struct MapFile {
    width: usize,
    height: usize,
    resolution: f64,
    class_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    classes: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image: Option<PathBuf>,
}

/// Loads a map file: a JSON header plus either an inline row-major `classes`
/// array or an `image` path to an 8-bit grayscale image whose pixel values
/// are class ids. Image row 0 is map row 0.
pub fn load_segmented_map(path: &Path) -> Result<SegmentedMap> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_segmented_map(&text, base)
}

/// Parses map JSON; relative image paths resolve against `base_dir`.
pub fn parse_segmented_map(text: &str, base_dir: &Path) -> Result<SegmentedMap> {
    let file: MapFile = serde_json::from_str(text).map_err(|e| json_error(&e))?;
    let shape = GridShape::new(file.width, file.height, file.resolution);
    let classes = match (file.classes, file.image) {
        (Some(raw), None) => raw
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                u8::try_from(c)
                    .map_err(|_| Error::Validation(format!("cell {i} has class id {c}, must be < {CLASS_COUNT}")))
            })
            .collect::<Result<Vec<_>>>()?,
        (None, Some(image)) => read_class_image(&base_dir.join(image), shape)?,
        (Some(_), Some(_)) => {
            return Err(Error::parse("classes", "give either `classes` or `image`, not both"))
        }
        (None, None) => return Err(Error::parse("classes", "missing `classes` or `image`")),
    };
    SegmentedMap::new(shape, classes, file.class_names)
}

fn read_class_image(path: &Path, shape: GridShape) -> Result<Vec<u8>> {
    let img = image::open(path)
        .map_err(|e| Error::parse("image", format!("{}: {e}", path.display())))?
        .to_luma8();
    if img.width() as usize != shape.width || img.height() as usize != shape.height {
        return Err(Error::parse(
            "image",
            format!(
                "image is {}x{}, header says {}x{}",
                img.width(),
                img.height(),
                shape.width,
                shape.height
            ),
        ));
    }
    Ok(img.into_raw())
}

pub fn map_to_json(map: &SegmentedMap) -> String {
    let file = MapFile {
        width: map.shape.width,
        height: map.shape.height,
        resolution: map.shape.resolution,
        class_names: map.class_names.clone(),
        classes: Some(map.classes.iter().map(|&c| c as i64).collect()),
        image: None,
    };
    serde_json::to_string(&file).expect("map serializes")
}

pub(crate) fn json_error(e: &serde_json::Error) -> Error {
    // serde_json reports "missing field `x`" / "invalid type ..."; keep the
    // field name when present.
    let msg = e.to_string();
    let field = msg
        .split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| "<document>".into());
    Error::parse(field, msg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names_json() -> String {
        serde_json::to_string(&default_class_names()).unwrap()
    }

    #[test]
    fn parses_inline_map() {
        let text = format!(
            r#"{{"width":2,"height":2,"resolution":0.5,"class_names":{},"classes":[0,1,2,3]}}"#,
            names_json()
        );
        let map = parse_segmented_map(&text, Path::new(".")).unwrap();
        assert_eq!(map.shape.len(), 4);
        assert_eq!(map.classes, vec![0, 1, 2, 3]);
        assert_eq!(map.shape.resolution, 0.5);
    }

    #[test]
    fn rejects_class_fourteen() {
        let text = format!(
            r#"{{"width":2,"height":1,"resolution":1.0,"class_names":{},"classes":[0,14]}}"#,
            names_json()
        );
        let err = parse_segmented_map(&text, Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn malformed_names_offending_field() {
        let err = parse_segmented_map(r#"{"width":2,"height":1,"class_names":[]}"#, Path::new("."))
            .unwrap_err();
        match err {
            Error::Parse { field, .. } => assert_eq!(field, "resolution"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn occupancy_examples() {
        let shape = GridShape::new(4, 4, 1.0);
        let obstacles = BTreeSet::from([1u8]);
        let zeros = SegmentedMap::filled(shape, 0).unwrap();
        assert_eq!(derive_occupancy(&zeros, &obstacles).free_count(), 16);
        let ones = SegmentedMap::filled(shape, 1).unwrap();
        assert_eq!(derive_occupancy(&ones, &obstacles).free_count(), 0);
        let checker: Vec<u8> = (0..16).map(|i| ((i % 4 + i / 4) % 2) as u8).collect();
        let map = SegmentedMap::new(shape, checker, default_class_names()).unwrap();
        let occ = derive_occupancy(&map, &obstacles);
        assert_eq!(occ.occupied.iter().filter(|&&o| o).count(), 8);
    }
}
