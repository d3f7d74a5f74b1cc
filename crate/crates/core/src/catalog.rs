//! Built-in shapes keyed by figure number, plus JSON shape files.

use serde::{Deserialize, Serialize};

use crate::geometry::{build_polygon, GeometryError, Point2, Polygon};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapeFile {
    pub name: String,
    pub vertices: Vec<[f64; 2]>,
}

impl ShapeFile {
    pub fn points(&self) -> Vec<Point2> {
        self.vertices.iter().map(|v| Point2::new(v[0], v[1])).collect()
    }
    pub fn polygon(&self) -> Result<Polygon, GeometryError> {
        build_polygon(&self.points())
    }
}

pub struct Entry {
    pub key: &'static str,
    pub title: &'static str,
    /// True when the shape comes from a printed vertex table; false when it was
    /// constructed here to match a figure that only shows a picture.
    pub tabulated: bool,
    pub vertices: &'static [(f64, f64)],
}

pub const CATALOG: &[Entry] = &[
    Entry { key: "fig151", title: "Triangular shape", tabulated: true, vertices: &[(0.20, 0.00), (1.00, 0.20), (0.00, 1.00)] },
    Entry {
        key: "fig152",
        title: "Quadrangular shape",
        tabulated: true,
        vertices: &[(0.20, 0.00), (1.00, 0.20), (0.80, 1.20), (0.00, 1.00)],
    },
    Entry { key: "fig153", title: "Smallest considered triangular shape", tabulated: true, vertices: &[(0.07, 0.18), (0.41, 0.05), (0.36, 0.41)] },
    Entry { key: "fig154", title: "Small considered triangular shape", tabulated: true, vertices: &[(0.15, 0.38), (0.89, 0.10), (0.76, 0.87)] },
    Entry { key: "fig155", title: "Considered triangular shape", tabulated: true, vertices: &[(0.30, 0.75), (1.77, 0.21), (1.53, 1.74)] },
    Entry { key: "fig156", title: "Big considered triangular shape", tabulated: true, vertices: &[(0.60, 1.50), (3.54, 0.42), (3.06, 3.48)] },
    Entry { key: "fig157", title: "Biggest considered triangular shape", tabulated: true, vertices: &[(0.90, 2.25), (5.31, 0.63), (4.59, 5.22)] },
    Entry {
        key: "fig158",
        title: "Quadrangular shape with parallel edges",
        tabulated: true,
        vertices: &[(0.25, 0.00), (0.50, 0.25), (0.25, 0.50), (0.00, 0.25)],
    },
    Entry {
        key: "fig159",
        title: "Pentagonal shape",
        tabulated: true,
        vertices: &[(0.08, 0.07), (0.33, 0.02), (0.48, 0.23), (0.28, 0.39), (0.03, 0.33)],
    },
    Entry {
        key: "fig160",
        title: "Regular hexagonal shape",
        tabulated: true,
        vertices: &[(2.05, 1.98), (2.31, 1.92), (2.35, 2.17), (2.31, 2.43), (2.08, 2.32), (1.86, 2.16)],
    },
    Entry {
        key: "fig161",
        title: "Hexagonal shape",
        tabulated: true,
        vertices: &[(0.07, 0.07), (0.16, 0.02), (0.42, 0.11), (0.34, 0.21), (0.20, 0.33), (0.04, 0.23)],
    },
    Entry {
        key: "fig162",
        title: "Alternative hexagonal shape",
        tabulated: true,
        vertices: &[(0.13, 0.13), (0.32, 0.04), (0.84, 0.21), (0.78, 0.38), (0.50, 0.66), (0.08, 0.45)],
    },
    Entry {
        key: "fig163",
        title: "Non-convex quadrilateral",
        tabulated: true,
        vertices: &[(0.14, 0.03), (0.37, 0.10), (0.21, 0.14), (0.06, 0.28)],
    },
    Entry {
        key: "fig164",
        title: "Non-convex pentagon",
        tabulated: true,
        vertices: &[(0.17, 0.03), (0.38, 0.19), (0.30, 0.18), (0.12, 0.36), (0.19, 0.11)],
    },
    Entry {
        key: "fig165",
        title: "Non-convex hexagon",
        tabulated: true,
        vertices: &[(0.00, 0.03), (0.12, 0.07), (0.38, 0.00), (0.30, 0.25), (0.12, 0.38), (-0.12, 0.25)],
    },
    Entry {
        key: "fig166",
        title: "Alternative non-convex hexagon",
        tabulated: true,
        vertices: &[(0.07, 0.03), (0.35, 0.10), (0.45, 0.25), (0.25, 0.30), (0.05, 0.25), (0.14, 0.16)],
    },
    Entry {
        key: "fig167",
        title: "Non-convex decagon",
        tabulated: true,
        vertices: &[
            (0.22, 0.10),
            (0.50, 0.30),
            (0.76, 0.10),
            (0.70, 0.40),
            (0.90, 0.70),
            (0.60, 0.62),
            (0.50, 0.90),
            (0.35, 0.68),
            (0.12, 0.50),
            (0.30, 0.35),
        ],
    },
    Entry {
        key: "fig168",
        title: "Hanging node",
        tabulated: true,
        vertices: &[(0.20, 0.00), (1.00, 0.20), (1.60, 1.40), (0.80, 1.20), (0.00, 1.00)],
    },
    Entry {
        key: "fig169",
        title: "Polygon having similar edges",
        tabulated: true,
        vertices: &[
            (0.20, 0.00),
            (1.00, 0.20),
            (3.50, 0.00),
            (2.40, 1.60),
            (1.60, 1.40),
            (1.70, 0.90),
            (0.90, 0.70),
            (0.80, 1.20),
            (0.00, 1.00),
        ],
    },
    Entry {
        key: "fig170",
        title: "Two vertices aligned with the origin (quadrilateral)",
        tabulated: false,
        vertices: &[(0.20, 0.10), (0.80, 0.40), (0.60, 0.80), (0.10, 0.50)],
    },
    Entry {
        key: "fig171",
        title: "Two vertices aligned with the origin (triangle)",
        tabulated: false,
        vertices: &[(0.10, 0.10), (0.60, 0.20), (0.30, 0.30)],
    },
    Entry {
        key: "fig172",
        title: "Edge parallel to the x axis",
        tabulated: false,
        vertices: &[(0.10, 0.10), (0.50, 0.10), (0.60, 0.40), (0.35, 0.60), (0.05, 0.40)],
    },
    Entry {
        key: "fig173",
        title: "Edge parallel to the y axis",
        tabulated: false,
        vertices: &[(0.10, 0.10), (0.50, 0.05), (0.50, 0.45), (0.30, 0.60), (0.05, 0.40)],
    },
    Entry { key: "fig73", title: "Triangle used for the printed transfer matrices", tabulated: true, vertices: &[(0.20, 0.00), (1.00, 0.20), (0.00, 1.00)] },
    Entry {
        key: "fig74",
        title: "Two edge normals collinear with (1,1)",
        tabulated: false,
        vertices: &[(0.20, 0.00), (1.00, 0.20), (0.60, 0.60), (-0.20, 0.40)],
    },
];

pub fn lookup(key: &str) -> Option<&'static Entry> {
    CATALOG.iter().find(|e| e.key.eq_ignore_ascii_case(key))
}

impl Entry {
    pub fn points(&self) -> Vec<Point2> {
        self.vertices.iter().map(|&(x, y)| Point2::new(x, y)).collect()
    }
    pub fn polygon(&self) -> Polygon {
        build_polygon(&self.points()).expect("catalog shapes are valid")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ShapeSourceError {
    #[error("unknown catalog key or unreadable file `{0}`")]
    NotFound(String),
    #[error("bad shape file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Resolves a catalog key, or failing that, a JSON shape file path.
pub fn resolve(source: &str) -> Result<(String, Polygon), ShapeSourceError> {
    if let Some(e) = lookup(source) {
        return Ok((e.key.to_string(), e.polygon()));
    }
    let text = std::fs::read_to_string(source).map_err(|_| ShapeSourceError::NotFound(source.to_string()))?;
    let file: ShapeFile = serde_json::from_str(&text)?;
    let poly = file.polygon()?;
    Ok((file.name, poly))
}
