//! Python bindings: options codec, job runs, and the container commands
//! (view, export, replay, diff).

use std::path::PathBuf;

use jobprov::cli::{self, CliError, DiffReport, ViewFormat, EXIT_VERIFICATION};
use jobprov::container;
use jobprov::options::{self, OptionKey, OptionValue, OptionsSet};
use jobprov::{Catalogue, JobEnvironment};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyTypeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyBytes, PyDict, PyFloat, PyInt, PyList, PyString};

create_exception!(pyjobprov, JobprovError, PyException, "Base class for jobprov errors.");
create_exception!(pyjobprov, OptionsError, JobprovError, "Malformed options document or value.");
create_exception!(pyjobprov, ContainerFormatError, JobprovError, "Unreadable or corrupt container.");
create_exception!(pyjobprov, MissingInfoError, ContainerFormatError, "Container has no provenance.");
create_exception!(pyjobprov, JobFailedError, JobprovError, "A job phase failed.");
create_exception!(pyjobprov, VerificationError, JobprovError, "Lineage, checksum or replay verification failed.");

fn cli_err(e: CliError) -> PyErr {
    let msg = e.to_string();
    if e.exit_code() == EXIT_VERIFICATION {
        return VerificationError::new_err(msg);
    }
    match e {
        CliError::Read { .. } | CliError::Write { .. } => PyOSError::new_err(msg),
        CliError::Parse { .. } => OptionsError::new_err(msg),
        CliError::MissingInfo(_) => MissingInfoError::new_err(msg),
        CliError::Container { .. } => ContainerFormatError::new_err(msg),
        _ => JobFailedError::new_err(msg),
    }
}

fn container_err(e: container::ContainerError) -> PyErr {
    match e {
        container::ContainerError::MissingInfo => MissingInfoError::new_err(e.to_string()),
        container::ContainerError::ChecksumMismatch(_) => VerificationError::new_err(e.to_string()),
        container::ContainerError::Io(io) => PyOSError::new_err(io.to_string()),
        other => ContainerFormatError::new_err(other.to_string()),
    }
}

fn env(working_dir: Option<PathBuf>) -> JobEnvironment {
    JobEnvironment { working_dir: working_dir.unwrap_or_default(), ..JobEnvironment::default() }
}

fn to_py<'py>(py: Python<'py>, value: &OptionValue) -> PyResult<Bound<'py, PyAny>> {
    Ok(match value {
        OptionValue::Integer(i) => PyInt::new(py, *i).into_any(),
        OptionValue::Float(f) => PyFloat::new(py, *f).into_any(),
        OptionValue::Boolean(b) => PyBool::new(py, *b).to_owned().into_any(),
        OptionValue::Text(s) => PyString::new(py, s).into_any(),
        OptionValue::List(items) => {
            let items = items.iter().map(|v| to_py(py, v)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
    })
}

fn from_py(obj: &Bound<'_, PyAny>) -> PyResult<OptionValue> {
    // bool before int: Python bools are ints
    let value = if obj.is_instance_of::<PyBool>() {
        OptionValue::Boolean(obj.extract()?)
    } else if obj.is_instance_of::<PyInt>() {
        OptionValue::Integer(obj.extract()?)
    } else if obj.is_instance_of::<PyFloat>() {
        OptionValue::Float(obj.extract()?)
    } else if obj.is_instance_of::<PyString>() {
        OptionValue::Text(obj.extract()?)
    } else if obj.is_instance_of::<PyList>() || obj.is_instance_of::<pyo3::types::PyTuple>() {
        OptionValue::List(obj.try_iter()?.map(|item| from_py(&item?)).collect::<PyResult<_>>()?)
    } else {
        return Err(PyTypeError::new_err(format!("unsupported option value type `{}`", obj.get_type().name()?)));
    };
    value.validate().map_err(|e| OptionsError::new_err(e.to_string()))?;
    Ok(value)
}

fn set_to_dict<'py>(py: Python<'py>, set: &OptionsSet) -> PyResult<Bound<'py, PyDict>> {
    let dict = PyDict::new(py);
    for (k, v) in set {
        dict.set_item(k.as_str(), to_py(py, v)?)?;
    }
    Ok(dict)
}

fn dict_to_set(dict: &Bound<'_, PyDict>) -> PyResult<OptionsSet> {
    let mut set = OptionsSet::new();
    for (k, v) in dict.iter() {
        let key: String = k.extract()?;
        let key = OptionKey::parse(&key).map_err(|e| OptionsError::new_err(e.to_string()))?;
        set.insert(key, from_py(&v)?).map_err(|e| OptionsError::new_err(e.to_string()))?;
    }
    Ok(set)
}

/// Parses an options document into a `{key: value}` dict, sorted by key.
#[pyfunction]
fn parse_options<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyDict>> {
    let set = options::parse_options(text).map_err(|e| OptionsError::new_err(e.to_string()))?;
    set_to_dict(py, &set)
}

/// Canonical text for a `{key: value}` dict.
#[pyfunction]
fn emit_canonical(config: &Bound<'_, PyDict>) -> PyResult<String> {
    Ok(options::emit_canonical(&dict_to_set(config)?))
}

#[pyfunction]
fn value_to_text(value: &Bound<'_, PyAny>) -> PyResult<String> {
    options::value_to_text(&from_py(value)?).map_err(|e| OptionsError::new_err(e.to_string()))
}

#[pyfunction]
fn text_to_value<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    let value = options::text_to_value(text).map_err(|e| OptionsError::new_err(e.to_string()))?;
    to_py(py, &value)
}

/// Outcome of a job run.
#[pyclass(frozen, module = "pyjobprov")]
struct JobReport {
    inner: jobprov::JobReport,
}

#[pymethods]
impl JobReport {
    #[getter]
    fn initialize(&self) -> String {
        self.inner.initialize.to_string()
    }

    #[getter]
    fn execute(&self) -> String {
        self.inner.execute.to_string()
    }

    #[getter]
    fn finalize(&self) -> String {
        self.inner.finalize.to_string()
    }

    #[getter]
    fn events_seen(&self) -> u64 {
        self.inner.events_seen
    }

    #[getter]
    fn events_written(&self) -> u64 {
        self.inner.events_written
    }

    #[getter]
    fn output_path(&self) -> Option<PathBuf> {
        self.inner.output_path.clone()
    }

    /// CRC32C of the `events` block.
    #[getter]
    fn payload_checksum(&self) -> Option<u32> {
        self.inner.payload_checksum
    }

    #[getter]
    fn blocks(&self) -> Vec<(String, u32)> {
        self.inner.blocks.clone()
    }

    fn succeeded(&self) -> bool {
        self.inner.succeeded()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "JobReport(events_seen={}, events_written={}, succeeded={})",
            self.inner.events_seen,
            self.inner.events_written,
            if self.inner.succeeded() { "True" } else { "False" }
        )
    }
}

fn report(inner: jobprov::JobReport) -> JobReport {
    JobReport { inner }
}

/// Runs a job from options text, or from a `{key: value}` dict.
#[pyfunction]
#[pyo3(signature = (config, working_dir=None))]
fn run(config: &Bound<'_, PyAny>, working_dir: Option<PathBuf>) -> PyResult<JobReport> {
    let set = if let Ok(dict) = config.cast::<PyDict>() {
        dict_to_set(dict)?
    } else {
        let text: String = config.extract()?;
        options::parse_options(&text).map_err(|e| OptionsError::new_err(e.to_string()))?
    };
    let job = jobprov::run_job(&set, &Catalogue::demo(), env(working_dir)).map_err(|e| cli_err(CliError::Job(e)))?;
    Ok(report(job.report().clone()))
}

/// Runs a job from an options file.
#[pyfunction]
#[pyo3(signature = (path, working_dir=None))]
fn run_file(path: PathBuf, working_dir: Option<PathBuf>) -> PyResult<JobReport> {
    cli::cmd_run(&path, &env(working_dir)).map(report).map_err(cli_err)
}

/// The `info` dictionary of a container as `{key: canonical value text}`.
#[pyfunction]
fn extract_info(path: PathBuf) -> PyResult<Vec<(String, String)>> {
    let info = container::extract_info(&path).map_err(container_err)?;
    Ok(info.iter().map(|(k, v)| (k.clone(), v.clone())).collect())
}

#[pyfunction]
fn block_names(path: PathBuf) -> PyResult<Vec<String>> {
    let toc = container::read_toc(&path).map_err(container_err)?;
    Ok(toc.entries().iter().map(|e| e.name.clone()).collect())
}

#[pyfunction]
fn read_block<'py>(py: Python<'py>, path: PathBuf, name: &str) -> PyResult<Bound<'py, PyBytes>> {
    let payload = container::read_block(&path, name).map_err(container_err)?;
    Ok(PyBytes::new(py, &payload))
}

/// Renders a container's provenance; `format` is `"table"` or `"tsv"`.
#[pyfunction]
#[pyo3(signature = (path, format="table"))]
fn view(path: PathBuf, format: &str) -> PyResult<String> {
    let format = match format {
        "table" => ViewFormat::Table,
        "tsv" => ViewFormat::Tsv,
        other => return Err(PyValueError::new_err(format!("unknown format `{other}`"))),
    };
    cli::cmd_view(&path, format, &JobEnvironment::default()).map_err(cli_err)
}

#[pyfunction]
fn export(path: PathBuf, out: PathBuf) -> PyResult<()> {
    cli::cmd_export(&path, &out, &JobEnvironment::default()).map_err(cli_err)
}

/// Re-runs the job recorded in `path`, writing to `out`, and verifies the
/// reproduced events and provenance.
#[pyfunction]
#[pyo3(signature = (path, out, working_dir=None))]
fn replay(path: PathBuf, out: PathBuf, working_dir: Option<PathBuf>) -> PyResult<JobReport> {
    cli::cmd_replay(&path, &out, &env(working_dir)).map(|o| report(o.report)).map_err(cli_err)
}

/// Key-level difference between two containers' provenance.
#[pyclass(frozen, module = "pyjobprov", name = "DiffReport")]
struct PyDiffReport {
    inner: DiffReport,
}

#[pymethods]
impl PyDiffReport {
    #[getter]
    fn only_left(&self) -> Vec<(String, String)> {
        self.inner.only_left.clone()
    }

    #[getter]
    fn only_right(&self) -> Vec<(String, String)> {
        self.inner.only_right.clone()
    }

    #[getter]
    fn changed(&self) -> Vec<(String, String, String)> {
        self.inner.changed.clone()
    }

    fn is_empty(&self) -> bool {
        self.inner.is_empty()
    }

    fn __bool__(&self) -> bool {
        !self.inner.is_empty()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }
}

#[pyfunction]
fn diff(a: PathBuf, b: PathBuf) -> PyResult<PyDiffReport> {
    cli::cmd_diff(&a, &b, &JobEnvironment::default()).map(|inner| PyDiffReport { inner }).map_err(cli_err)
}

#[pymodule]
pub fn pyjobprov(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("JobprovError", py.get_type::<JobprovError>())?;
    m.add("OptionsError", py.get_type::<OptionsError>())?;
    m.add("ContainerFormatError", py.get_type::<ContainerFormatError>())?;
    m.add("MissingInfoError", py.get_type::<MissingInfoError>())?;
    m.add("JobFailedError", py.get_type::<JobFailedError>())?;
    m.add("VerificationError", py.get_type::<VerificationError>())?;
    m.add_class::<JobReport>()?;
    m.add_class::<PyDiffReport>()?;
    m.add_function(wrap_pyfunction!(parse_options, m)?)?;
    m.add_function(wrap_pyfunction!(emit_canonical, m)?)?;
    m.add_function(wrap_pyfunction!(value_to_text, m)?)?;
    m.add_function(wrap_pyfunction!(text_to_value, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_file, m)?)?;
    m.add_function(wrap_pyfunction!(extract_info, m)?)?;
    m.add_function(wrap_pyfunction!(block_names, m)?)?;
    m.add_function(wrap_pyfunction!(read_block, m)?)?;
    m.add_function(wrap_pyfunction!(view, m)?)?;
    m.add_function(wrap_pyfunction!(export, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(diff, m)?)?;
    Ok(())
}
