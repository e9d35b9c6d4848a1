//! Persistence: models and geometric objects as JSON, datasets as CSV.
//!
//! Model files carry a `format_version` field checked before anything else is read.
//! Malformed documents are reported as [`Error::Parse`] with the one-based line and column
//! of the failure.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{Ellipsoid, Zonotope};
use crate::model::{Dataset, SignedMeasureModel, Unit, WeightedUnit};
use crate::Error;

/// Model format version written by this build.
pub const MODEL_FORMAT_VERSION: u32 = 1;

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(parse_error)
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    format_version: u32,
    alpha: u32,
    p: f64,
    radius: f64,
    units: Vec<UnitDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UnitDoc {
    eta: f64,
    v: Vec<f64>,
}

/// Serializes a model as pretty-printed JSON.
pub fn model_to_json(model: &SignedMeasureModel) -> String {
    let doc = ModelDoc {
        format_version: MODEL_FORMAT_VERSION,
        alpha: model.alpha(),
        p: model.p(),
        radius: model.radius(),
        units: model
            .units()
            .iter()
            .map(|u| UnitDoc {
                eta: u.eta,
                v: u.unit.v().to_vec(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("model documents serialize")
}

/// Parses a model, checking the version tag before the remaining fields.
pub fn model_from_json(text: &str) -> Result<SignedMeasureModel> {
    let probe: VersionProbe = from_json(text)?;
    if probe.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: probe.format_version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let doc: ModelDoc = from_json(text)?;
    let units = doc
        .units
        .into_iter()
        .map(|u| {
            Ok(WeightedUnit {
                eta: u.eta,
                unit: Unit::new(u.v, doc.p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SignedMeasureModel::from_units(doc.alpha, doc.p, doc.radius, units)
}

/// Writes a model to `path`.
pub fn save_model(model: &SignedMeasureModel, path: &Path) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(model_to_json(model).as_bytes())?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

/// Reads a model from `path`.
pub fn load_model(path: &Path) -> Result<SignedMeasureModel> {
    model_from_json(&std::fs::read_to_string(path)?)
}

/// A geometric object stored as JSON, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GeometryDoc {
    /// Zonotope with generators in `R^dim`.
    Zonotope {
        /// Ambient dimension.
        dim: usize,
        /// Generators.
        generators: Vec<Vec<f64>>,
    },
    /// Ellipsoid `{x : (x − a)ᵀA⁻¹(x − a) ≤ 1}`.
    Ellipsoid {
        /// Center `a`.
        center: Vec<f64>,
        /// Shape matrix `A`, row by row.
        shape: Vec<Vec<f64>>,
    },
}

/// A validated geometric object.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    /// A zonotope.
    Zonotope(Zonotope),
    /// An ellipsoid.
    Ellipsoid(Ellipsoid),
}

/// Parses and validates a geometric object.
pub fn geometry_from_json(text: &str) -> Result<Geometry> {
    match from_json::<GeometryDoc>(text)? {
        GeometryDoc::Zonotope { dim, generators } => {
            Ok(Geometry::Zonotope(Zonotope::new(generators, dim)?))
        }
        GeometryDoc::Ellipsoid { center, shape } => {
            Ok(Geometry::Ellipsoid(Ellipsoid::new(center, shape)?))
        }
    }
}

/// Serializes a geometric object.
pub fn geometry_to_json(g: &Geometry) -> String {
    let doc = match g {
        Geometry::Zonotope(z) => GeometryDoc::Zonotope {
            dim: z.dim(),
            generators: z.generators().to_vec(),
        },
        Geometry::Ellipsoid(e) => GeometryDoc::Ellipsoid {
            center: e.center.clone(),
            shape: e.shape.clone(),
        },
    };
    serde_json::to_string_pretty(&doc).expect("geometry documents serialize")
}

/// Parses any JSON document with line and column reporting.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    from_json(text)
}

/// Writes a dataset as CSV with header `x1,…,xd,y`.
pub fn write_dataset_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=dataset.d()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for (x, y) in dataset.xs().iter().zip(dataset.ys()) {
        w.write_record(x.iter().chain(std::iter::once(y)).map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset written by [`write_dataset_csv`]. The last column holds labels. When
/// `radius` is `None` it is fitted to the largest `ℓ_q` norm of the inputs.
pub fn read_dataset_csv<R: Read>(reader: R, q: f64, radius: Option<f64>) -> Result<Dataset> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let width = r.headers()?.len();
    if width < 2 {
        return Err(invalid(
            "dataset needs at least one input column and a label column",
        ));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (row, record) in r.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(row + 2, |p| p.line() as usize);
        if record.len() != width {
            return Err(Error::Parse {
                line,
                column: 1,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        let mut vals = Vec::with_capacity(width);
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                column: j + 1,
                message: format!("field {field:?} is not a number"),
            })?;
            vals.push(v);
        }
        ys.push(vals.pop().expect("width at least two"));
        xs.push(vals);
    }
    match radius {
        Some(r) => Dataset::new(xs, ys, r, q),
        None => Dataset::with_fitted_radius(xs, ys, q),
    }
}

/// Writes a dataset to `path`.
pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    write_dataset_csv(dataset, BufWriter::new(File::create(path)?))
}

/// Reads a dataset from `path`.
pub fn load_dataset(path: &Path, q: f64, radius: Option<f64>) -> Result<Dataset> {
    read_dataset_csv(BufReader::new(File::open(path)?), q, radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{rng_from_seed, sample_gaussian};
    use crate::model::predict;

    fn model() -> SignedMeasureModel {
        let mut rng = rng_from_seed(3);
        let units = (0..5)
            .map(|i| WeightedUnit {
                eta: 0.3 * i as f64 - 0.5,
                unit: Unit::from_direction(&sample_gaussian(&mut rng, 3), 1.5).unwrap(),
            })
            .collect();
        SignedMeasureModel::from_units(1, 1.5, 2.0, units).unwrap()
    }

    #[test]
    fn model_round_trip_predicts_identically() {
        let m = model();
        let back = model_from_json(&model_to_json(&m)).unwrap();
        assert_eq!(back, m);
        let mut rng = rng_from_seed(4);
        for _ in 0..1000 {
            let x: Vec<f64> = sample_gaussian(&mut rng, 2)
                .iter()
                .map(|v| v * 0.5)
                .collect();
            assert_eq!(predict(&back, &x).unwrap(), predict(&m, &x).unwrap());
        }
    }

    #[test]
    fn missing_field_reports_position() {
        let text =
            "{\n  \"format_version\": 1,\n  \"alpha\": 1,\n  \"p\": 2.0,\n  \"units\": []\n}";
        match model_from_json(text) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 6);
                assert!(message.contains("radius"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_line_and_column() {
        match model_from_json("{\n  \"format_version\": 1,\n  \"alpha\": ,\n}") {
            Err(Error::Parse {
                line: 3,
                column: 12,
                ..
            }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let text =
            model_to_json(&model()).replace("\"format_version\": 1", "\"format_version\": 7");
        match model_from_json(&text) {
            Err(Error::UnsupportedVersion {
                found: 7,
                expected: 1,
            }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dataset_csv_round_trip() {
        let ds = Dataset::new(
            vec![vec![0.1, -0.2], vec![0.3, 0.4]],
            vec![1.0, -2.5],
            1.0,
            2.0,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&ds, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone())
            .unwrap()
            .starts_with("x1,x2,y\n"));
        assert_eq!(
            read_dataset_csv(buf.as_slice(), 2.0, Some(1.0)).unwrap(),
            ds
        );
    }

    #[test]
    fn dataset_csv_errors_point_at_the_field() {
        let text = "x1,y\n0.5,1\n0.2,abc\n";
        match read_dataset_csv(text.as_bytes(), 2.0, None) {
            Err(Error::Parse {
                line: 3, column: 2, ..
            }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn geometry_round_trip_and_validation() {
        let z = Geometry::Zonotope(Zonotope::new(vec![vec![1.0, 0.0], vec![0.5, 2.0]], 2).unwrap());
        assert_eq!(geometry_from_json(&geometry_to_json(&z)).unwrap(), z);
        let e = Geometry::Ellipsoid(
            Ellipsoid::new(vec![0.0, 1.0], vec![vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap(),
        );
        assert_eq!(geometry_from_json(&geometry_to_json(&e)).unwrap(), e);
        let bad = r#"{"kind":"ellipsoid","center":[0,0],"shape":[[1,2],[0,1]]}"#;
        assert!(matches!(
            geometry_from_json(bad),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            geometry_from_json(r#"{"kind":"cube"}"#),
            Err(Error::Parse { .. })
        ));
    }
}
