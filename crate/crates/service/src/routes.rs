use std::collections::{BTreeMap, HashMap};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cegforge_core::ceg::{LabelMode, ModelComparison, ModelSummary};
use cegforge_core::dataset::{ColumnRef, RowFilter, TimeColumn};
use cegforge_core::event_tree::parse_ids;
use cegforge_core::priors::{parse_override_key, PriorMode};
use cegforge_core::spatial::{area_probabilities, load_geo, render_map_document};
use cegforge_core::{
    Colour, CsvOptions, Dataset, DeletionMode, PriorTable, StagedTreeModel, Staging, TimeGranularity,
    VertexId,
};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{ApiError, ApiResult};
use crate::projection;
use crate::session::{Archive, Link, Selection, Session};
use crate::AppState;

type Id = Path<String>;
type Params = Query<HashMap<String, String>>;

pub(crate) fn routes(max_upload: usize) -> Router<AppState> {
    Router::new()
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}", get(session_status).delete(delete_session))
        .route("/sessions/{id}/archive", get(save_archive).put(load_archive))
        .route("/sessions/{id}/dataset", get(get_dataset).post(upload_dataset))
        .route("/sessions/{id}/columns", get(get_columns).post(set_columns))
        .route("/sessions/{id}/filter", get(get_filter).post(set_filter))
        .route("/sessions/{id}/tree", get(get_tree).post(build_tree))
        .route("/sessions/{id}/tree/delete", post(delete_nodes))
        .route("/sessions/{id}/staging", get(get_staging))
        .route("/sessions/{id}/staging/groups", post(colour_groups))
        .route("/sessions/{id}/staging/ahc", post(run_ahc))
        .route("/sessions/{id}/staging/clear", post(clear_stages))
        .route("/sessions/{id}/priors", get(get_priors).post(set_priors))
        .route("/sessions/{id}/staged-tree", get(get_staged).post(build_staged))
        .route("/sessions/{id}/ceg", get(get_ceg).post(build_ceg))
        .route("/sessions/{id}/ceg/reduced", post(reduce_ceg))
        .route("/sessions/{id}/ceg/summary", get(ceg_summary))
        .route("/sessions/{id}/ceg/compare", post(compare))
        .route("/sessions/{id}/map/geo", get(get_geo).post(upload_geo))
        .route("/sessions/{id}/map/probabilities", post(map_probabilities))
        .layer(DefaultBodyLimit::max(max_upload))
}

fn reply(status: StatusCode, id: &str, s: &Session, body: Value) -> Response {
    let mut body = body;
    if let Value::Object(m) = &mut body {
        m.insert("session".into(), json!(id));
        m.insert("revision".into(), json!(s.revision));
    }
    let mut r = (status, Json(body)).into_response();
    r.headers_mut().insert(
        header::ETAG,
        HeaderValue::from_str(&format!("\"{}\"", s.revision)).expect("ascii"),
    );
    r
}

fn ok(id: &str, s: &Session, body: Value) -> ApiResult<Response> {
    Ok(reply(StatusCode::OK, id, s, body))
}

fn text(content_type: &'static str, body: String) -> Response {
    ([(header::CONTENT_TYPE, content_type)], body).into_response()
}

/// Decodes a JSON body; an empty body reads as `{}`.
fn body<T: DeserializeOwned>(bytes: &Bytes) -> ApiResult<T> {
    let src: &[u8] = if bytes.iter().all(u8::is_ascii_whitespace) { b"{}" } else { bytes };
    serde_json::from_slice(src).map_err(|e| ApiError::BadRequest(format!("invalid request body: {e}")))
}

fn flag(params: &HashMap<String, String>, key: &str, default: bool) -> ApiResult<bool> {
    match params.get(key).map(|v| v.to_ascii_lowercase()) {
        None => Ok(default),
        Some(v) if v == "true" || v == "1" || v == "yes" => Ok(true),
        Some(v) if v == "false" || v == "0" || v == "no" => Ok(false),
        Some(v) => Err(ApiError::BadRequest(format!("`{key}` must be true or false, got `{v}`"))),
    }
}

fn byte(params: &HashMap<String, String>, key: &str, default: u8) -> ApiResult<u8> {
    match params.get(key) {
        None => Ok(default),
        Some(v) if v == "\\t" || v == "tab" => Ok(b'\t'),
        Some(v) if v.len() == 1 && v.is_ascii() => Ok(v.as_bytes()[0]),
        Some(v) => Err(ApiError::BadRequest(format!("`{key}` must be one ASCII character, got `{v}`"))),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IdList {
    Text(String),
    List(Vec<String>),
}

impl IdList {
    fn parse(&self) -> ApiResult<Vec<VertexId>> {
        Ok(match self {
            IdList::Text(t) => parse_ids(t)?,
            IdList::List(v) => parse_ids(&v.join(","))?,
        })
    }
}

fn label_mode(v: Option<&str>) -> ApiResult<Option<LabelMode>> {
    Ok(v.map(str::parse).transpose()?)
}

// Sessions

async fn list_sessions(State(st): State<AppState>) -> Json<Value> {
    Json(json!({ "sessions": st.ids() }))
}

async fn create_session(State(st): State<AppState>, bytes: Bytes) -> ApiResult<Response> {
    let session = if bytes.iter().all(u8::is_ascii_whitespace) {
        Session::default()
    } else {
        Session::from_archive(Archive::from_text(&bytes)?)?
    };
    let view = status_view(&session);
    let id = st.insert(session);
    let s = st.snapshot(&id)?;
    Ok(reply(StatusCode::CREATED, &id, &s, view))
}

fn status_view(s: &Session) -> Value {
    json!({
        "artifacts": {
            "dataset": s.source.is_some(),
            "columns": s.selection.is_some(),
            "filter": s.filter.is_some(),
            "tree": s.tree.is_some(),
            "staging": s.staging.is_some(),
            "priors": s.priors.is_some(),
            "staged_tree": s.staged.is_some(),
            "ceg": s.ceg.is_some(),
            "geo": s.geo.is_some(),
        }
    })
}

async fn session_status(State(st): State<AppState>, Path(id): Id) -> ApiResult<Response> {
    let s = st.snapshot(&id)?;
    ok(&id, &s, status_view(&s))
}

async fn delete_session(State(st): State<AppState>, Path(id): Id) -> StatusCode {
    st.remove(&id);
    StatusCode::NO_CONTENT
}

async fn save_archive(State(st): State<AppState>, Path(id): Id) -> ApiResult<Response> {
    let s = st.snapshot(&id)?;
    Ok(text("application/json", s.to_archive()?.to_text()))
}

async fn load_archive(
    State(st): State<AppState>,
    Path(id): Id,
    headers: HeaderMap,
    bytes: Bytes,
) -> ApiResult<Response> {
    let loaded = Session::from_archive(Archive::from_text(&bytes)?)?;
    let s = st
        .mutate(&id, &headers, |s| {
            *s = Session { revision: s.revision, ..loaded };
            Ok(())
        })
        .await?;
    ok(&id, &s, status_view(&s))
}

// Dataset, columns and filter

fn dataset_view(s: &Session, head: usize) -> ApiResult<Value> {
    let d = s.source()?;
    let o = &s.csv_options;
    Ok(json!({
        "columns": d.columns(),
        "row_count": d.len(),
        "head": d.rows().iter().take(head).collect::<Vec<_>>(),
        "options": {
            "header": o.header,
            "separator": (o.separator as char).to_string(),
            "quote": (o.quote as char).to_string(),
            "exclude_first_column": o.exclude_first_column,
        },
    }))
}

fn head_rows(params: &HashMap<String, String>) -> ApiResult<usize> {
    params.get("rows").map_or(Ok(6), |v| {
        v.parse().map_err(|_| ApiError::BadRequest(format!("`rows` must be a count, got `{v}`")))
    })
}

async fn get_dataset(State(st): State<AppState>, Path(id): Id, Query(q): Params) -> ApiResult<Response> {
    let s = st.snapshot(&id)?;
    if q.get("format").map(String::as_str) == Some("csv") {
        return Ok(text("text/csv", s.source()?.to_csv_string(&s.csv_options)));
    }
    ok(&id, &s, dataset_view(&s, head_rows(&q)?)?)
}

async fn upload_dataset(
    State(st): State<AppState>,
    Path(id): Id,
    Query(q): Params,
    headers: HeaderMap,
    bytes: Bytes,
) -> ApiResult<Response> {
    let options = CsvOptions {
        header: flag(&q, "header", true)?,
        separator: byte(&q, "sep", b',')?,
        quote: byte(&q, "quote", b'"')?,
        exclude_first_column: flag(&q, "drop_first_col", false)?,
    };
    let data = Dataset::from_csv_bytes(&bytes, &options)?;
    let s = st
        .mutate(&id, &headers, |s| {
            s.invalidate_after(Link::Dataset);
            s.csv_options = options;
            s.source = Some(data);
            Ok(())
        })
        .await?;
    ok(&id, &s, dataset_view(&s, head_rows(&q)?)?)
}

fn columns_view(s: &Session) -> ApiResult<Value> {
    let d = s.source()?;
    let columns: Vec<Value> = d
        .columns()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            Ok(json!({
                "index": i + 1,
                "name": c,
                "levels": d.value_counts(c)?,
            }))
        })
        .collect::<ApiResult<_>>()?;
    Ok(json!({ "columns": columns, "selection": s.selection }))
}

async fn get_columns(State(st): State<AppState>, Path(id): Id) -> ApiResult<Response> {
    let s = st.snapshot(&id)?;
    ok(&id, &s, columns_view(&s)?)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ColumnSel {
    Index(usize),
    Name(String),
}

#[derive(Deserialize)]
struct TimeBody {
    column: String,
    granularity: String,
    #[serde(default)]
    format: String,
}

#[derive(Deserialize)]
struct ColumnsBody {
    #[serde(default)]
    columns: Vec<ColumnSel>,
    #[serde(default)]
    area: Option<String>,
    #[serde(default)]
    time: Option<TimeBody>,
}

async fn set_columns(
    State(st): State<AppState>,
    Path(id): Id,
    headers: HeaderMap,
    bytes: Bytes,
) -> ApiResult<Response> {
    let req: ColumnsBody = body(&bytes)?;
    let time = match req.time {
        Some(t) => Some(TimeColumn::new(t.column, t.granularity.parse::<TimeGranularity>()?, t.format)),
        None => None,
    };
    let s = st
        .mutate(&id, &headers, |s| {
            let source = s.source()?;
            let refs: Vec<ColumnRef> = if req.columns.is_empty() {
                source.columns().iter().map(|c| ColumnRef::Name(c.clone())).collect()
            } else {
                req.columns
                    .iter()
                    .map(|c| match c {
                        ColumnSel::Index(i) => ColumnRef::Index(*i),
                        ColumnSel::Name(n) => ColumnRef::Name(n.clone()),
                    })
                    .collect()
            };
            let columns = source.select_columns(&refs)?.columns().to_vec();
            // Validates the designations against the full table.
            source.clone().with_area_column(req.area.as_deref())?.with_time_column(time.clone())?;
            s.invalidate_after(Link::Dataset);
            s.selection = Some(Selection { columns, area: req.area, time });
            Ok(())
        })
        .await?;
    ok(&id, &s, columns_view(&s)?)
}

fn filter_view(s: &Session) -> ApiResult<Value> {
    Ok(json!({
        "filter": s.filter,
        "rows_before": s.source()?.len(),
        "rows_after": s.working_data()?.len(),
    }))
}

async fn get_filter(State(st): State<AppState>, Path(id): Id) -> ApiResult<Response> {
    let s = st.snapshot(&id)?;
    ok(&id, &s, filter_view(&s)?)
}

async fn set_filter(
    State(st): State<AppState>,
    Path(id): Id,
    headers: HeaderMap,
    bytes: Bytes,
) -> ApiResult<Response> {
    let filter: RowFilter = body(&bytes)?;
    let s = st
        .mutate(&id, &headers, |s| {
            s.source()?;
            s.invalidate_after(Link::Columns);
            s.filter = Some(filter);
            s.working_data()?;
            Ok(())
        })
        .await?;
    ok(&id, &s, filter_view(&s)?)
}

// Tree

fn tree_view(s: &Session) -> ApiResult<Value> {
    let t = s.tree()?;
    let summary = t.summary();
    Ok(json!({
        "tree": t.to_document(),
        "summary": summary,
        "summary_text": summary.to_string(),
        "projection": projection::tree(t, s.staging.as_ref()),
    }))
}

async fn get_tree(State(st): State<AppState>, Path(id): Id, Query(q): Params) -> ApiResult<Response> {
    let s = st.snapshot(&id)?;
    if q.get("format").map(String::as_str) == Some("dot") {
        return Ok(text("text/vnd.graphviz", s.tree()?.to_dot()));
    }
    ok(&id, &s, tree_view(&s)?)
}

async fn build_tree(State(st): State<AppState>, Path(id): Id, headers: HeaderMap) -> ApiResult<Response> {
    let s = st
        .mutate(&id, &headers, |s| {
            let tree = s.build_tree()?;
            s.invalidate_after(Link::Filter);
            s.tree = Some(tree);
            Ok(())
        })
        .await?;
    ok(&id, &s, tree_view(&s)?)
}

#[derive(Deserialize)]
struct DeleteBody {
    ids: IdList,
    #[serde(default)]
    mode: Option<String>,
}

async fn delete_nodes(
    State(st): State<AppState>,
    Path(id): Id,
    headers: HeaderMap,
    bytes: Bytes,
) -> ApiResult<Response> {
    let req: DeleteBody = body(&bytes)?;
    let ids = req.ids.parse()?;
    let mode: DeletionMode = match &req.mode {
        Some(m) => m.parse()?,
        None => DeletionMode::default(),
    };
    let s = st
        .mutate(&id, &headers, |s| {
            let tree = s.tree()?.delete_nodes(&ids, mode)?;
            s.invalidate_after(Link::Filter);
            s.tree = Some(tree);
            Ok(())
        })
        .await?;
    ok(&id, &s, tree_view(&s)?)
}

// Staging

fn staging_view(s: &Session) -> ApiResult<Value> {
    let t = s.tree()?;
    let empty = Staging::new();
    let staging = s.staging.as_ref().unwrap_or(&empty);
    let summary = staging.summary(t);
    Ok(json!({
        "staging": staging.to_document(t)?,
        "complete": staging.is_complete(t),
        "uncoloured": staging.uncoloured(t).iter().map(ToString::to_string).collect::<Vec<_>>(),
        "summary": summary,
        "summary_text": summary.to_string(),
        "projection": projection::tree(t, Some(staging)),
    }))
}

async fn get_staging(State(st): State<AppState>, Path(id): Id) -> ApiResult<Response> {
    let s = st.snapshot(&id)?;
    ok(&id, &s, staging_view(&s)?)
}

#[derive(Deserialize)]
struct Group {
    ids: IdList,
    #[serde(default)]
    colour: Option<String>,
}

#[derive(Deserialize)]
struct GroupsBody {
    groups: Vec<Group>,
}

async fn colour_groups(
    State(st): State<AppState>,
    Path(id): Id,
    headers: HeaderMap,
    bytes: Bytes,
) -> ApiResult<Response> {
    let req: GroupsBody = body(&bytes)?;
    let groups: Vec<Vec<VertexId>> = req.groups.iter().map(|g| g.ids.parse()).collect::<ApiResult<_>>()?;
    let given: Vec<Colour> = req
        .groups
        .iter()
        .filter_map(|g| g.colour.as_deref())
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    let colours = match given.len() {
        0 => None,
        n if n == groups.len() => Some(given),
        _ => {
            return Err(ApiError::BadRequest(
                "give a colour for every group or for none of them".into(),
            ))
        }
    };
    let s = st
        .mutate(&id, &headers, |s| {
            let base = s.staging.clone().unwrap_or_default();
            let next = base.assign_stages(s.tree()?, &groups, colours.as_deref())?;
            s.invalidate_after(Link::Tree);
            s.staging = Some(next);
            Ok(())
        })
        .await?;
    ok(&id, &s, staging_view(&s)?)
}

async fn run_ahc(State(st): State<AppState>, Path(id): Id, headers: HeaderMap) -> ApiResult<Response> {
    let mut steps = Value::Null;
    let s = st
        .mutate(&id, &headers, |s| {
            let base = s.staging.clone().unwrap_or_default();
            let out = base.run_ahc(s.tree()?, None)?;
            steps = json!({
                "steps": out.steps,
                "initial_score": out.initial_score,
                "final_score": out.final_score,
            });
            s.invalidate_after(Link::Tree);
            s.staging = Some(out.staging);
            Ok(())
        })
        .await?;
    let mut view = staging_view(&s)?;
    view["ahc"] = steps;
    ok(&id, &s, view)
}

#[derive(Deserialize)]
struct ClearBody {
    ids: IdList,
}

async fn clear_stages(
    State(st): State<AppState>,
    Path(id): Id,
    headers: HeaderMap,
    bytes: Bytes,
) -> ApiResult<Response> {
    let ids = body::<ClearBody>(&bytes)?.ids.parse()?;
    let s = st
        .mutate(&id, &headers, |s| {
            s.tree()?;
            let next = s.staging.clone().unwrap_or_default().clear(&ids);
            s.invalidate_after(Link::Tree);
            s.staging = Some(next);
            Ok(())
        })
        .await?;
    ok(&id, &s, staging_view(&s)?)
}

// Priors

fn priors_view(s: &Session) -> ApiResult<Value> {
    let p = s.priors()?;
    Ok(json!({
        "priors": p,
        "means": p.rows.iter().map(|r| r.mean()).collect::<Vec<_>>(),
        "text": p.to_string(),
    }))
}

async fn get_priors(State(st): State<AppState>, Path(id): Id, Query(q): Params) -> ApiResult<Response> {
    let s = st.snapshot(&id)?;
    if q.get("format").map(String::as_str) == Some("csv") {
        return Ok(text("text/csv", s.priors()?.to_delimited(b',')));
    }
    ok(&id, &s, priors_view(&s)?)
}

#[derive(Deserialize)]
struct PriorsBody {
    #[serde(default)]
    mode: Option<String>,
    #[serde(default)]
    overrides: BTreeMap<String, Vec<f64>>,
}

async fn set_priors(
    State(st): State<AppState>,
    Path(id): Id,
    headers: HeaderMap,
    bytes: Bytes,
) -> ApiResult<Response> {
    let req: PriorsBody = body(&bytes)?;
    let mode: PriorMode = req.mode.as_deref().unwrap_or("uniform").parse()?;
    let overrides: BTreeMap<usize, Vec<f64>> = req
        .overrides
        .into_iter()
        .map(|(k, v)| Ok((parse_override_key(&k)?, v)))
        .collect::<ApiResult<_>>()?;
    let s = st
        .mutate(&id, &headers, |s| {
            let table = PriorTable::specify(s.tree()?, s.staging()?, mode, &overrides)?;
            s.invalidate_after(Link::Staging);
            s.priors = Some(table);
            Ok(())
        })
        .await?;
    ok(&id, &s, priors_view(&s)?)
}

// Staged tree and CEG

fn staged_view(s: &Session) -> ApiResult<Value> {
    let m = s.staged()?;
    let table = m.update_table();
    let summary = m.summary();
    Ok(json!({
        "updated": m.is_updated(),
        "update_table": table,
        "update_table_csv": table.to_delimited(b','),
        "summary": summary,
        "summary_text": summary.to_string(),
        "projection": projection::staged_tree(m),
    }))
}

async fn get_staged(State(st): State<AppState>, Path(id): Id, Query(q): Params) -> ApiResult<Response> {
    let s = st.snapshot(&id)?;
    match q.get("format").map(String::as_str) {
        Some("dot") => Ok(text("text/vnd.graphviz", s.staged()?.to_dot())),
        Some("csv") => Ok(text("text/csv", s.staged()?.update_table().to_delimited(b','))),
        _ => ok(&id, &s, staged_view(&s)?),
    }
}

#[derive(Deserialize)]
struct StagedBody {
    #[serde(default)]
    label_mode: Option<String>,
    #[serde(default)]
    update: Option<bool>,
}

async fn build_staged(
    State(st): State<AppState>,
    Path(id): Id,
    headers: HeaderMap,
    bytes: Bytes,
) -> ApiResult<Response> {
    let req: StagedBody = body(&bytes)?;
    let mode = label_mode(req.label_mode.as_deref())?.unwrap_or_default();
    let s = st
        .mutate(&id, &headers, |s| {
            let m = StagedTreeModel::new(s.tree()?, s.staging()?, s.priors()?, mode)?;
            let m = if req.update.unwrap_or(true) { m.posterior_update() } else { m };
            s.invalidate_after(Link::Priors);
            s.staged = Some(m);
            Ok(())
        })
        .await?;
    ok(&id, &s, staged_view(&s)?)
}

fn ceg_view(s: &Session) -> ApiResult<Value> {
    let c = s.ceg()?;
    Ok(json!({
        "ceg": c,
        "projection": projection::ceg(c),
    }))
}

async fn get_ceg(State(st): State<AppState>, Path(id): Id, Query(q): Params) -> ApiResult<Response> {
    let s = st.snapshot(&id)?;
    if q.get("format").map(String::as_str) == Some("dot") {
        return Ok(text("text/vnd.graphviz", s.ceg()?.to_dot()));
    }
    ok(&id, &s, ceg_view(&s)?)
}

#[derive(Deserialize)]
struct CegBody {
    #[serde(default)]
    label_mode: Option<String>,
}

async fn build_ceg(
    State(st): State<AppState>,
    Path(id): Id,
    headers: HeaderMap,
    bytes: Bytes,
) -> ApiResult<Response> {
    let req: CegBody = body(&bytes)?;
    let mode = label_mode(req.label_mode.as_deref())?;
    let s = st
        .mutate(&id, &headers, |s| {
            let m = s.staged()?;
            let c = m.contract().with_label_mode(mode.unwrap_or(m.label_mode()));
            s.ceg = Some(c);
            Ok(())
        })
        .await?;
    ok(&id, &s, ceg_view(&s)?)
}

#[derive(Deserialize)]
struct ReduceBody {
    #[serde(default)]
    categories: Vec<String>,
}

async fn reduce_ceg(State(st): State<AppState>, Path(id): Id, bytes: Bytes) -> ApiResult<Response> {
    let req: ReduceBody = body(&bytes)?;
    let s = st.snapshot(&id)?;
    let cats: Vec<&str> = req.categories.iter().map(String::as_str).collect();
    let r = s.ceg()?.reduced(&cats)?;
    ok(&id, &s, json!({
        "categories": req.categories,
        "paths": r.paths(),
        "projection": projection::ceg(&r),
        "ceg": r,
    }))
}

fn summary_view(summary: &ModelSummary) -> Value {
    json!({
        "summary": summary,
        "flagged": summary.flagged(),
        "text": summary.to_string(),
    })
}

async fn ceg_summary(State(st): State<AppState>, Path(id): Id) -> ApiResult<Response> {
    let s = st.snapshot(&id)?;
    ok(&id, &s, summary_view(&s.ceg()?.summary()))
}

#[derive(Deserialize)]
struct CompareBody {
    #[serde(default)]
    session: Option<String>,
    #[serde(default)]
    summary: Option<ModelSummary>,
}

/// Compares this session's model (model 1) with another session's or with
/// a summary document (model 2).
async fn compare(State(st): State<AppState>, Path(id): Id, bytes: Bytes) -> ApiResult<Response> {
    let req: CompareBody = body(&bytes)?;
    let s = st.snapshot(&id)?;
    let mine = s.ceg()?.summary();
    let other = match (req.session, req.summary) {
        (Some(other), None) => st.snapshot(&other)?.ceg()?.summary(),
        (None, Some(summary)) => summary,
        _ => {
            return Err(ApiError::BadRequest(
                "give exactly one of `session` or `summary`".into(),
            ))
        }
    };
    let c = ModelComparison::new(&mine, &other);
    ok(&id, &s, json!({ "comparison": c, "text": c.to_string() }))
}

// Maps

fn geo_view(s: &Session) -> ApiResult<Value> {
    let g = s
        .geo
        .as_ref()
        .ok_or_else(|| crate::error::missing("area map", "upload GeoJSON"))?;
    Ok(json!({
        "name_property": g.name_property,
        "features": g.features.iter().map(|f| f.name.as_str()).collect::<Vec<_>>(),
    }))
}

async fn get_geo(State(st): State<AppState>, Path(id): Id) -> ApiResult<Response> {
    let s = st.snapshot(&id)?;
    ok(&id, &s, geo_view(&s)?)
}

async fn upload_geo(
    State(st): State<AppState>,
    Path(id): Id,
    Query(q): Params,
    headers: HeaderMap,
    bytes: Bytes,
) -> ApiResult<Response> {
    let name = q.get("name_prop").map_or("NAME", String::as_str);
    let map = load_geo(&bytes, name, q.get("crs").map(String::as_str))?;
    let s = st
        .mutate(&id, &headers, |s| {
            s.geo = Some(map);
            Ok(())
        })
        .await?;
    ok(&id, &s, geo_view(&s)?)
}

#[derive(Deserialize)]
struct ProbabilityBody {
    colour_by: String,
    #[serde(default)]
    conditionals: Vec<String>,
    #[serde(default)]
    palette: Option<String>,
}

async fn map_probabilities(State(st): State<AppState>, Path(id): Id, bytes: Bytes) -> ApiResult<Response> {
    let req: ProbabilityBody = body(&bytes)?;
    let s = st.snapshot(&id)?;
    let conds: Vec<&str> = req.conditionals.iter().map(String::as_str).collect();
    let table = area_probabilities(s.ceg()?, &req.colour_by, &conds)?;
    let mut view = json!({
        "table": table,
        "table_csv": table.to_delimited(b','),
        "selected": table.selected(),
    });
    if let Some(geo) = &s.geo {
        let mut map = geo.clone();
        map.match_areas(&table.areas())?;
        let palette = req.palette.as_deref().unwrap_or("viridis");
        view["map"] = render_map_document(&map, &table, palette, &req.colour_by)?;
        view["unmatched"] = json!(map.unmatched());
    }
    ok(&id, &s, view)
}
