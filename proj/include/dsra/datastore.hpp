// Copyright 2026 the dsra authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dsra/canonical.hpp"
#include "dsra/errors.hpp"
#include "dsra/jsoncanon.hpp"
#include "dsra/time.hpp"

namespace dsra {

// ---------------------------------------------------------------------------
// Records and datasets
// ---------------------------------------------------------------------------

/// One cell of service-provider data. Typed fields carry the attribute they
/// were mapped to plus an eagerly computed canonical form; untyped fields
/// (order numbers, free-text notes) keep only their label and never take part
/// in matching. `derived` marks controller-inferred values such as an age
/// band -- they match differently and their score contribution is capped.
struct DataField {
  std::optional<AttributeType> attr;      // typed iff set
  std::string label;                      // source column / label
  std::string raw;                        // value exactly as ingested
  std::optional<std::string> canonical;   // cached canonical form (typed only)
  bool derived = false;
};

struct DataRecord {
  std::string record_id;
  std::string dataset_id;
  std::vector<DataField> fields;

  const DataField* typed_field(const AttributeId& id) const {
    for (const auto& f : fields)
      if (f.attr && f.attr->id == id) return &f;
    return nullptr;
  }
};

enum class Sensitivity { normal, special_category };

inline std::string_view sensitivity_name(Sensitivity s) {
  return s == Sensitivity::normal ? "normal" : "special_category";
}

inline Sensitivity sensitivity_parse(std::string_view s) {
  if (s == "normal") return Sensitivity::normal;
  if (s == "special_category") return Sensitivity::special_category;
  throw ConfigError("bad sensitivity '" + std::string(s) + "'");
}

struct DataSet {
  std::string dataset_id;
  std::string description;
  std::vector<DataRecord> records;
  Sensitivity sensitivity = Sensitivity::normal;

  const DataRecord* find(const std::string& record_id) const {
    for (const auto& r : records)
      if (r.record_id == record_id) return &r;
    return nullptr;
  }
};

/// A data set is special_category exactly when it holds a sensitive typed
/// field; the flag is never set by hand.
inline Sensitivity derive_sensitivity(const DataSet& ds) {
  for (const auto& r : ds.records)
    for (const auto& f : r.fields)
      if (f.attr && f.attr->sensitive) return Sensitivity::special_category;
  return Sensitivity::normal;
}

struct RecordHandle {
  std::string dataset_id;
  std::string record_id;

  auto operator<=>(const RecordHandle&) const = default;

  std::string str() const { return dataset_id + "/" + record_id; }
};

// ---------------------------------------------------------------------------
// Scope
// ---------------------------------------------------------------------------

/// What part of the store a rights request ranges over: everything, named
/// data sets, or individual records.
struct Scope {
  enum class Kind { all, datasets, records };
  Kind kind = Kind::all;
  std::vector<std::string> dataset_ids;      // Kind::datasets
  std::vector<RecordHandle> records;         // Kind::records

  static Scope everything() { return Scope{}; }
  static Scope of_datasets(std::vector<std::string> ids) {
    Scope s;
    s.kind = Kind::datasets;
    s.dataset_ids = std::move(ids);
    return s;
  }
  static Scope of_records(std::vector<RecordHandle> handles) {
    Scope s;
    s.kind = Kind::records;
    s.records = std::move(handles);
    return s;
  }
};

inline Json scope_to_json(const Scope& s) {
  switch (s.kind) {
    case Scope::Kind::all:
      return Json{{"kind", "all"}};
    case Scope::Kind::datasets:
      return Json{{"kind", "datasets"}, {"dataset_ids", s.dataset_ids}};
    case Scope::Kind::records: {
      Json list = Json::array();
      for (const auto& h : s.records)
        list.push_back(Json{{"dataset_id", h.dataset_id},
                            {"record_id", h.record_id}});
      return Json{{"kind", "records"}, {"records", list}};
    }
  }
  throw ConfigError("bad scope kind");
}

inline Scope scope_from_json(const Json& j) {
  Scope s;
  std::string kind = require(j, "kind").get<std::string>();
  if (kind == "all") {
    s.kind = Scope::Kind::all;
  } else if (kind == "datasets") {
    s.kind = Scope::Kind::datasets;
    s.dataset_ids = require(j, "dataset_ids").get<std::vector<std::string>>();
  } else if (kind == "records") {
    s.kind = Scope::Kind::records;
    for (const auto& h : require(j, "records"))
      s.records.push_back(
          RecordHandle{require(h, "dataset_id").get<std::string>(),
                       require(h, "record_id").get<std::string>()});
  } else {
    throw ConfigError("bad scope kind '" + kind + "'");
  }
  return s;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace csv {

/// RFC 4180 flavor: quoted fields may hold commas, doubled quotes and
/// newlines; CRLF and LF both end rows.
inline std::vector<std::vector<std::string>> parse(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  size_t i = 0;
  auto end_field = [&] {
    row.push_back(field);
    field.clear();
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(row);
    row.clear();
  };
  while (i < text.size()) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          i += 2;
        } else {
          quoted = false;
          ++i;
        }
      } else {
        field.push_back(c);
        ++i;
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        ++i;
        break;
      case ',':
        end_field();
        ++i;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        [[fallthrough]];
      case '\n':
        end_row();
        ++i;
        break;
      default:
        field.push_back(c);
        ++i;
    }
  }
  if (quoted) throw UnparseableValue("unterminated quote in csv");
  if (!field.empty() || !row.empty()) end_row();
  return rows;
}

}  // namespace csv

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

/// Sidecar that names the data set and ties source columns to attributes.
/// A column mapped to an attribute id becomes a typed field; a column mapped
/// to null is kept as an untyped label; unmentioned columns are dropped.
struct IngestMapping {
  std::string dataset_id;
  std::string description;
  std::optional<std::string> record_id_column;
  std::vector<std::pair<std::string, std::optional<AttributeId>>> columns;
};

inline IngestMapping ingest_mapping_from_json(const Json& j) {
  IngestMapping m;
  m.dataset_id = require(j, "dataset_id").get<std::string>();
  if (j.contains("description"))
    m.description = j["description"].get<std::string>();
  if (j.contains("record_id_column"))
    m.record_id_column = j["record_id_column"].get<std::string>();
  for (const auto& [column, attr] : require(j, "columns").items()) {
    if (attr.is_null())
      m.columns.emplace_back(column, std::nullopt);
    else
      m.columns.emplace_back(column, attr.get<std::string>());
  }
  return m;
}

struct QuarantinedRow {
  size_t row = 0;  // 1-based data row number (header not counted)
  std::string column;
  std::string reason;
};

struct IngestReport {
  std::string dataset_id;
  size_t accepted = 0;
  std::vector<QuarantinedRow> quarantined;

  Json to_json() const {
    Json q = Json::array();
    for (const auto& r : quarantined)
      q.push_back(
          Json{{"row", r.row}, {"column", r.column}, {"reason", r.reason}});
    return Json{{"dataset_id", dataset_id},
                {"accepted", accepted},
                {"quarantined", q}};
  }
};

// ---------------------------------------------------------------------------
// Store
// ---------------------------------------------------------------------------

class Store {
 public:
  explicit Store(AttributeRegistry registry)
      : registry_(std::move(registry)) {}

  const AttributeRegistry& registry() const { return registry_; }

  /// Adding recomputes the sensitivity flag; nothing else trusts it.
  void add_dataset(DataSet ds) {
    for (auto& r : ds.records) r.dataset_id = ds.dataset_id;
    ds.sensitivity = derive_sensitivity(ds);
    for (auto& existing : datasets_) {
      if (existing.dataset_id == ds.dataset_id) {
        existing = std::move(ds);
        return;
      }
    }
    datasets_.push_back(std::move(ds));
  }

  const std::vector<DataSet>& datasets() const { return datasets_; }

  const DataSet* dataset(const std::string& id) const {
    for (const auto& ds : datasets_)
      if (ds.dataset_id == id) return &ds;
    return nullptr;
  }

  /// Sorted union of every typed attribute over ALL data sets. This is what
  /// the service provider requests from every device -- never a subset.
  std::vector<AttributeId> attribute_catalog() const {
    std::set<AttributeId> ids;
    for (const auto& ds : datasets_)
      for (const auto& r : ds.records)
        for (const auto& f : r.fields)
          if (f.attr) ids.insert(f.attr->id);
    return {ids.begin(), ids.end()};
  }

  std::vector<const DataRecord*> candidate_records(const Scope& scope) const {
    std::vector<const DataRecord*> out;
    switch (scope.kind) {
      case Scope::Kind::all:
        for (const auto& ds : datasets_)
          for (const auto& r : ds.records) out.push_back(&r);
        break;
      case Scope::Kind::datasets:
        for (const auto& id : scope.dataset_ids) {
          const DataSet* ds = dataset(id);
          if (!ds) throw UnknownScopeId("dataset '" + id + "'");
          for (const auto& r : ds->records) out.push_back(&r);
        }
        break;
      case Scope::Kind::records:
        for (const auto& h : scope.records) {
          const DataSet* ds = dataset(h.dataset_id);
          if (!ds) throw UnknownScopeId("dataset '" + h.dataset_id + "'");
          const DataRecord* r = ds->find(h.record_id);
          if (!r) throw UnknownScopeId("record '" + h.str() + "'");
          out.push_back(r);
        }
        break;
    }
    return out;
  }

  /// True when any data set in scope is special_category.
  Sensitivity scope_sensitivity(const Scope& scope) const {
    auto touches = [&](const DataSet& ds) {
      switch (scope.kind) {
        case Scope::Kind::all:
          return true;
        case Scope::Kind::datasets:
          return std::find(scope.dataset_ids.begin(), scope.dataset_ids.end(),
                           ds.dataset_id) != scope.dataset_ids.end();
        case Scope::Kind::records:
          return std::any_of(scope.records.begin(), scope.records.end(),
                             [&](const RecordHandle& h) {
                               return h.dataset_id == ds.dataset_id;
                             });
      }
      return false;
    };
    for (const auto& ds : datasets_)
      if (ds.sensitivity == Sensitivity::special_category && touches(ds))
        return Sensitivity::special_category;
    return Sensitivity::normal;
  }

  /// Ingest a tabular source under a column mapping. Typed fields are
  /// canonicalized eagerly; a row whose typed value will not canonicalize is
  /// quarantined whole and reported, never silently dropped.
  IngestReport ingest_csv(std::string_view csv_text,
                          const IngestMapping& mapping) {
    auto rows = csv::parse(csv_text);
    if (rows.size() < 2) throw EmptySource("csv has no data rows");
    const auto& header = rows.front();
    auto column_index = [&](const std::string& name) -> size_t {
      for (size_t c = 0; c < header.size(); ++c)
        if (header[c] == name) return c;
      throw MappingMismatch("column '" + name + "' not in csv header");
    };
    struct PlanEntry {
      size_t col;
      std::string label;
      std::optional<AttributeType> attr;
    };
    std::vector<PlanEntry> plan;
    for (const auto& [column, attr_id] : mapping.columns) {
      PlanEntry e{column_index(column), column, std::nullopt};
      if (attr_id) {
        if (!registry_.contains(*attr_id)) throw UnknownAttribute(*attr_id);
        e.attr = registry_.get(*attr_id);
      }
      plan.push_back(std::move(e));
    }
    std::optional<size_t> id_col;
    if (mapping.record_id_column)
      id_col = column_index(*mapping.record_id_column);

    DataSet ds;
    ds.dataset_id = mapping.dataset_id;
    ds.description = mapping.description;
    IngestReport report;
    report.dataset_id = mapping.dataset_id;
    for (size_t r = 1; r < rows.size(); ++r) {
      const auto& cells = rows[r];
      DataRecord rec;
      rec.record_id = id_col && *id_col < cells.size()
                          ? cells[*id_col]
                          : "row-" + std::to_string(r);
      bool ok = true;
      for (const auto& entry : plan) {
        if (entry.col >= cells.size() || cells[entry.col].empty()) continue;
        DataField f;
        f.label = entry.label;
        f.raw = cells[entry.col];
        if (entry.attr) {
          f.attr = entry.attr;
          f.derived = entry.attr->id.rfind("derived.", 0) == 0;
          try {
            f.canonical = canonicalize(*entry.attr, f.raw).text;
          } catch (const UnparseableValue& e) {
            report.quarantined.push_back({r, entry.label, e.what()});
            ok = false;
            break;
          }
        }
        rec.fields.push_back(std::move(f));
      }
      if (!ok) continue;
      ds.records.push_back(std::move(rec));
      ++report.accepted;
    }
    add_dataset(std::move(ds));
    return report;
  }

  /// Erase the given records. Returns how many were actually present.
  size_t erase_records(const std::vector<RecordHandle>& handles) {
    size_t erased = 0;
    for (const auto& h : handles) {
      for (auto& ds : datasets_) {
        if (ds.dataset_id != h.dataset_id) continue;
        auto before = ds.records.size();
        std::erase_if(ds.records, [&](const DataRecord& r) {
          return r.record_id == h.record_id;
        });
        erased += before - ds.records.size();
      }
    }
    return erased;
  }

  size_t record_count() const {
    size_t n = 0;
    for (const auto& ds : datasets_) n += ds.records.size();
    return n;
  }

 private:
  AttributeRegistry registry_;
  std::vector<DataSet> datasets_;
};

// ---------------------------------------------------------------------------
// Rights requests: execution and deadline tracking
// ---------------------------------------------------------------------------

enum class DsrType { access, erasure };

inline std::string_view dsr_type_name(DsrType t) {
  return t == DsrType::access ? "access" : "erasure";
}

inline DsrType dsr_type_parse(std::string_view s) {
  if (s == "access") return DsrType::access;
  if (s == "erasure") return DsrType::erasure;
  throw ConfigError("bad dsr type '" + std::string(s) + "'");
}

constexpr int64_t kDsrDeadlineDays = 30;

enum class DsrStatus { pending, fulfilled, declined, overdue };

inline std::string_view dsr_status_name(DsrStatus s) {
  switch (s) {
    case DsrStatus::pending: return "pending";
    case DsrStatus::fulfilled: return "fulfilled";
    case DsrStatus::declined: return "declined";
    case DsrStatus::overdue: return "overdue";
  }
  return "?";
}

struct DSRRequestRecord {
  std::string request_id;
  DsrType dsr_type = DsrType::access;
  Scope scope;
  UtcTime received_at;
  UtcTime deadline;  // received_at + 30 days
  std::optional<UtcTime> resolved_at;
  bool fulfilled = false;
  bool declined = false;

  /// Overdue is a condition, not a stored state: a pending request becomes
  /// overdue the moment the clock passes its deadline.
  DsrStatus status(UtcTime now) const {
    if (fulfilled) return DsrStatus::fulfilled;
    if (declined) return DsrStatus::declined;
    return now > deadline ? DsrStatus::overdue : DsrStatus::pending;
  }

  Json to_json(UtcTime now) const {
    Json j{{"request_id", request_id},
           {"dsr_type", std::string(dsr_type_name(dsr_type))},
           {"scope", scope_to_json(scope)},
           {"received_at", received_at.iso()},
           {"deadline", deadline.iso()},
           {"status", std::string(dsr_status_name(status(now)))}};
    if (resolved_at) j["resolved_at"] = resolved_at->iso();
    return j;
  }
};

/// Append-only journal of every rights request the SP has seen. Requests are
/// journaled on receipt, before verification, so the statutory clock runs
/// even for requests that end declined.
class DsrJournal {
 public:
  DSRRequestRecord& open(const std::string& request_id, DsrType type,
                         const Scope& scope, UtcTime received) {
    DSRRequestRecord rec;
    rec.request_id = request_id;
    rec.dsr_type = type;
    rec.scope = scope;
    rec.received_at = received;
    rec.deadline = received.plus_days(kDsrDeadlineDays);
    entries_.push_back(std::move(rec));
    return entries_.back();
  }

  DSRRequestRecord* find(const std::string& request_id) {
    for (auto& e : entries_)
      if (e.request_id == request_id) return &e;
    return nullptr;
  }

  void resolve(const std::string& request_id, bool accepted, UtcTime at) {
    DSRRequestRecord* rec = find(request_id);
    if (!rec) throw UnknownHandle("no journaled dsr '" + request_id + "'");
    if (rec->fulfilled || rec->declined) return;  // idempotent
    (accepted ? rec->fulfilled : rec->declined) = true;
    rec->resolved_at = at;
  }

  const std::vector<DSRRequestRecord>& entries() const { return entries_; }

  std::vector<const DSRRequestRecord*> overdue(UtcTime now) const {
    std::vector<const DSRRequestRecord*> out;
    for (const auto& e : entries_)
      if (e.status(now) == DsrStatus::overdue) out.push_back(&e);
    return out;
  }

 private:
  std::vector<DSRRequestRecord> entries_;
};

struct DSRResult {
  DsrType type = DsrType::access;
  std::vector<RecordHandle> records;
  Json exported = Json::array();  // access: deep copies of matched records
  size_t erased = 0;              // erasure
};

/// Act on the matched records. `authorized` is the caller's assertion that a
/// verification run accepted this requester; executing without one is the
/// single thing this layer refuses outright. An empty match set fulfills
/// vacuously.
inline DSRResult execute_dsr(Store& store, DSRRequestRecord& req,
                             const std::vector<RecordHandle>& matched,
                             bool authorized, UtcTime now) {
  if (!authorized)
    throw UnauthorizedExecution("dsr execution without an accept verdict");
  DSRResult out;
  out.type = req.dsr_type;
  out.records = matched;
  if (req.dsr_type == DsrType::access) {
    for (const auto& h : matched) {
      const DataSet* ds = store.dataset(h.dataset_id);
      const DataRecord* r = ds ? ds->find(h.record_id) : nullptr;
      if (!r) throw UnknownScopeId("record '" + h.str() + "'");
      Json fields = Json::array();
      for (const auto& f : r->fields) {
        Json fj{{"label", f.label}, {"raw", f.raw}, {"derived", f.derived}};
        if (f.attr) fj["attr"] = f.attr->id;
        fields.push_back(std::move(fj));
      }
      out.exported.push_back(Json{{"dataset_id", h.dataset_id},
                                  {"record_id", h.record_id},
                                  {"fields", fields}});
    }
  } else {
    out.erased = store.erase_records(matched);
  }
  req.fulfilled = true;
  req.resolved_at = now;
  return out;
}

// ---------------------------------------------------------------------------
// JSON round trips (data-set file format)
// ---------------------------------------------------------------------------

inline Json dataset_to_json(const DataSet& ds) {
  Json records = Json::array();
  for (const auto& r : ds.records) {
    Json fields = Json::array();
    for (const auto& f : r.fields) {
      Json fj{{"label", f.label}, {"raw", f.raw}, {"derived", f.derived}};
      if (f.attr) fj["attr"] = f.attr->id;
      if (f.canonical) fj["canonical"] = *f.canonical;
      fields.push_back(std::move(fj));
    }
    records.push_back(Json{{"record_id", r.record_id}, {"fields", fields}});
  }
  return Json{{"dataset_id", ds.dataset_id},
              {"description", ds.description},
              {"sensitivity", std::string(sensitivity_name(ds.sensitivity))},
              {"records", records}};
}

inline DataSet dataset_from_json(const Json& j,
                                 const AttributeRegistry& registry) {
  DataSet ds;
  ds.dataset_id = require(j, "dataset_id").get<std::string>();
  if (j.contains("description"))
    ds.description = j["description"].get<std::string>();
  for (const auto& r : require(j, "records")) {
    DataRecord rec;
    rec.record_id = require(r, "record_id").get<std::string>();
    rec.dataset_id = ds.dataset_id;
    for (const auto& fj : require(r, "fields")) {
      DataField f;
      f.label = require(fj, "label").get<std::string>();
      f.raw = require(fj, "raw").get<std::string>();
      f.derived = require(fj, "derived").get<bool>();
      if (fj.contains("attr")) {
        AttributeId id = fj["attr"].get<std::string>();
        if (!registry.contains(id)) throw UnknownAttribute(id);
        f.attr = registry.get(id);
        if (fj.contains("canonical"))
          f.canonical = fj["canonical"].get<std::string>();
        else
          f.canonical = canonicalize(*f.attr, f.raw).text;
      }
      rec.fields.push_back(std::move(f));
    }
    ds.records.push_back(std::move(rec));
  }
  ds.sensitivity = derive_sensitivity(ds);
  if (j.contains("sensitivity") &&
      sensitivity_parse(require(j, "sensitivity").get<std::string>()) !=
          ds.sensitivity)
    throw CorruptState("sensitivity flag inconsistent with fields in '" +
                       ds.dataset_id + "'");
  return ds;
}

}  // namespace dsra
