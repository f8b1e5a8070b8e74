// Copyright 2026 the dsra authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#include <catch2/catch_amalgamated.hpp>

#include "dsra/datastore.hpp"

using namespace dsra;

namespace {

Store make_store() { return Store(AttributeRegistry::with_defaults()); }

const std::string kOrdersCsv =
    "order_no,name,dob\n"
    "A-17,MUSTERMANN,12.08.1964\n"
    "A-18,\"de la Cruz, Maria\",1990-02-01\n"
    "A-19,Meier,Feb 30 1990\n"
    "A-20,Schulz,01/02/1990\n";

IngestMapping orders_mapping() {
  IngestMapping m;
  m.dataset_id = "orders";
  m.description = "order ledger";
  m.record_id_column = "order_no";
  m.columns = {{"order_no", std::nullopt},
               {"name", AttributeId("pid.family_name")},
               {"dob", AttributeId("pid.birth_date")}};
  return m;
}

}  // namespace

TEST_CASE("csv parser handles quotes, crlf and embedded commas",
          "[datastore]") {
  auto rows = csv::parse("a,b\r\n\"x,y\",\"say \"\"hi\"\"\"\n\"multi\nline\",z\n");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::vector<std::string>{"a", "b"});
  CHECK(rows[1] == std::vector<std::string>{"x,y", "say \"hi\""});
  CHECK(rows[2] == std::vector<std::string>{"multi\nline", "z"});
  CHECK_THROWS_AS(csv::parse("\"unterminated"), UnparseableValue);
  CHECK(csv::parse("last,line,no,newline").size() == 1);
}

TEST_CASE("ingest maps columns, quarantines bad rows, keeps labels",
          "[datastore]") {
  auto store = make_store();
  auto report = store.ingest_csv(kOrdersCsv, orders_mapping());
  CHECK(report.accepted == 3);
  REQUIRE(report.quarantined.size() == 1);
  CHECK(report.quarantined[0].row == 3);      // the Feb 30 row
  CHECK(report.quarantined[0].column == "dob");

  CHECK(store.attribute_catalog() ==
        std::vector<AttributeId>{"pid.birth_date", "pid.family_name"});

  const DataSet* ds = store.dataset("orders");
  REQUIRE(ds != nullptr);
  REQUIRE(ds->records.size() == 3);
  CHECK(ds->find("A-19") == nullptr);  // quarantined, not stored
  const DataRecord* r = ds->find("A-17");
  REQUIRE(r != nullptr);
  CHECK(r->dataset_id == "orders");
  // Untyped order number is kept as a label, raw value preserved.
  REQUIRE(r->fields.size() == 3);
  CHECK(r->fields[0].label == "order_no");
  CHECK_FALSE(r->fields[0].attr.has_value());
  CHECK(r->fields[1].raw == "MUSTERMANN");
  CHECK(r->fields[1].canonical == "mustermann");  // eager canonicalization
  CHECK(r->fields[2].canonical == "1964-08-12");
  CHECK_FALSE(r->fields[2].derived);
}

TEST_CASE("re-ingesting an identical source is deterministic", "[datastore]") {
  auto s1 = make_store();
  auto s2 = make_store();
  auto r1 = s1.ingest_csv(kOrdersCsv, orders_mapping());
  auto r2 = s2.ingest_csv(kOrdersCsv, orders_mapping());
  CHECK(r1.accepted == r2.accepted);
  CHECK(s1.attribute_catalog() == s2.attribute_catalog());
  CHECK(canonical_dump(dataset_to_json(*s1.dataset("orders"))) ==
        canonical_dump(dataset_to_json(*s2.dataset("orders"))));
}

TEST_CASE("ingest rejects empty sources and bad mappings", "[datastore]") {
  auto store = make_store();
  CHECK_THROWS_AS(store.ingest_csv("order_no,name,dob\n", orders_mapping()),
                  EmptySource);
  CHECK_THROWS_AS(store.ingest_csv("", orders_mapping()), EmptySource);
  auto broken = orders_mapping();
  broken.columns.emplace_back("missing_col", AttributeId("pid.given_name"));
  CHECK_THROWS_AS(store.ingest_csv(kOrdersCsv, broken), MappingMismatch);
  auto unknown = orders_mapping();
  unknown.columns[1].second = "pid.not_registered";
  CHECK_THROWS_AS(store.ingest_csv(kOrdersCsv, unknown), UnknownAttribute);
}

TEST_CASE("catalog is the union over all data sets", "[datastore]") {
  auto store = make_store();
  CHECK(store.attribute_catalog().empty());

  DataSet d1;
  d1.dataset_id = "d1";
  DataRecord r1{"r1", "d1", {}};
  r1.fields.push_back({AttributeType{"pid.given_name", AttrKind::text, false},
                       "first", "Ada", "ada", false});
  r1.fields.push_back({AttributeType{"pid.family_name", AttrKind::text, false},
                       "last", "Lovelace", "lovelace", false});
  d1.records.push_back(r1);
  store.add_dataset(d1);
  CHECK(store.attribute_catalog() ==
        std::vector<AttributeId>{"pid.family_name", "pid.given_name"});

  DataSet d2;
  d2.dataset_id = "d2";
  DataRecord r2{"r2", "d2", {}};
  r2.fields.push_back({AttributeType{"pid.family_name", AttrKind::text, false},
                       "surname", "Hopper", "hopper", false});
  r2.fields.push_back({AttributeType{"pid.email", AttrKind::identifier, false},
                       "mail", "g@example.com", "g@example.com", false});
  d2.records.push_back(r2);
  store.add_dataset(d2);
  CHECK(store.attribute_catalog() ==
        std::vector<AttributeId>{"pid.email", "pid.family_name",
                                 "pid.given_name"});
}

TEST_CASE("scopes select the right candidates", "[datastore]") {
  auto store = make_store();
  store.ingest_csv(kOrdersCsv, orders_mapping());
  store.ingest_csv("id,name\nC-1,Curie\n", IngestMapping{
      "customers", "", std::string("id"),
      {{"id", std::nullopt}, {"name", AttributeId("pid.family_name")}}});

  CHECK(store.candidate_records(Scope::everything()).size() == 4);
  auto only_orders = store.candidate_records(Scope::of_datasets({"orders"}));
  CHECK(only_orders.size() == 3);
  for (const auto* r : only_orders) CHECK(r->dataset_id == "orders");
  auto picked = store.candidate_records(
      Scope::of_records({{"orders", "A-17"}, {"customers", "C-1"}}));
  REQUIRE(picked.size() == 2);
  CHECK(picked[0]->record_id == "A-17");
  CHECK(picked[1]->record_id == "C-1");

  CHECK_THROWS_AS(store.candidate_records(Scope::of_datasets({"nope"})),
                  UnknownScopeId);
  CHECK_THROWS_AS(
      store.candidate_records(Scope::of_records({{"orders", "A-99"}})),
      UnknownScopeId);

  // Stable order: two calls agree.
  auto again = store.candidate_records(Scope::everything());
  CHECK(again.size() == 4);
  for (size_t i = 0; i < again.size(); ++i)
    CHECK(again[i]->record_id ==
          store.candidate_records(Scope::everything())[i]->record_id);
}

TEST_CASE("sensitivity is derived from the fields, never asserted",
          "[datastore]") {
  auto store = make_store();
  store.ingest_csv(
      "member,insurance\nM-1,K123456\n",
      IngestMapping{"health", "", std::string("member"),
                    {{"member", std::nullopt},
                     {"insurance", AttributeId("eaa.health_insurance_id")}}});
  CHECK(store.dataset("health")->sensitivity ==
        Sensitivity::special_category);
  store.ingest_csv(kOrdersCsv, orders_mapping());
  CHECK(store.dataset("orders")->sensitivity == Sensitivity::normal);

  CHECK(store.scope_sensitivity(Scope::everything()) ==
        Sensitivity::special_category);
  CHECK(store.scope_sensitivity(Scope::of_datasets({"orders"})) ==
        Sensitivity::normal);
  CHECK(store.scope_sensitivity(Scope::of_datasets({"health"})) ==
        Sensitivity::special_category);
}

TEST_CASE("access export copies records and leaves the store alone",
          "[datastore]") {
  auto store = make_store();
  store.ingest_csv(kOrdersCsv, orders_mapping());
  DsrJournal journal;
  auto now = UtcTime::from_iso("2026-03-01T00:00:00Z");
  auto& req = journal.open("req-1", DsrType::access, Scope::everything(), now);
  std::vector<RecordHandle> matched{{"orders", "A-17"}, {"orders", "A-18"},
                                    {"orders", "A-20"}};
  auto result = execute_dsr(store, req, matched, true, now);
  CHECK(result.exported.size() == 3);
  CHECK(store.record_count() == 3);  // unchanged
  CHECK(req.status(now) == DsrStatus::fulfilled);
  // The export carries full records including untyped labels.
  CHECK(result.exported[0]["fields"][0]["label"] == "order_no");
}

TEST_CASE("erasure removes matched records completely", "[datastore]") {
  auto store = make_store();
  store.ingest_csv(kOrdersCsv, orders_mapping());
  DsrJournal journal;
  auto now = UtcTime::from_iso("2026-03-01T00:00:00Z");
  auto& req = journal.open("req-2", DsrType::erasure, Scope::everything(), now);
  std::vector<RecordHandle> matched{{"orders", "A-17"}, {"orders", "A-18"},
                                    {"orders", "A-20"}};
  auto result = execute_dsr(store, req, matched, true, now);
  CHECK(result.erased == 3);
  CHECK(store.record_count() == 0);
  CHECK(store.candidate_records(Scope::everything()).empty());
  // Erasure completeness: no trace in the serialized store either.
  CHECK(canonical_dump(dataset_to_json(*store.dataset("orders")))
            .find("MUSTERMANN") == std::string::npos);
}

TEST_CASE("dsr execution without authorization is refused", "[datastore]") {
  auto store = make_store();
  store.ingest_csv(kOrdersCsv, orders_mapping());
  DsrJournal journal;
  auto now = UtcTime::from_iso("2026-03-01T00:00:00Z");
  auto& req = journal.open("req-3", DsrType::access, Scope::everything(), now);
  CHECK_THROWS_AS(execute_dsr(store, req, {{"orders", "A-17"}}, false, now),
                  UnauthorizedExecution);
  CHECK(req.status(now) == DsrStatus::pending);
}

TEST_CASE("empty match set fulfills vacuously", "[datastore]") {
  auto store = make_store();
  store.ingest_csv(kOrdersCsv, orders_mapping());
  DsrJournal journal;
  auto now = UtcTime::from_iso("2026-03-01T00:00:00Z");
  auto& req = journal.open("req-4", DsrType::erasure, Scope::everything(), now);
  auto result = execute_dsr(store, req, {}, true, now);
  CHECK(result.erased == 0);
  CHECK(store.record_count() == 3);
  CHECK(req.status(now) == DsrStatus::fulfilled);
}

TEST_CASE("deadline tracking flips to overdue exactly after 30 days",
          "[datastore]") {
  DsrJournal journal;
  auto received = UtcTime::from_iso("2026-03-01T10:00:00Z");
  auto& req =
      journal.open("req-5", DsrType::access, Scope::everything(), received);
  CHECK(req.deadline.iso() == "2026-03-31T10:00:00Z");
  CHECK(req.status(received) == DsrStatus::pending);
  CHECK(req.status(req.deadline) == DsrStatus::pending);  // at the deadline
  CHECK(req.status(req.deadline.plus_seconds(1)) == DsrStatus::overdue);
  CHECK(journal.overdue(req.deadline.plus_seconds(1)).size() == 1);
  journal.resolve("req-5", false, req.deadline.plus_seconds(2));
  CHECK(req.status(req.deadline.plus_seconds(3)) == DsrStatus::declined);
  CHECK(journal.overdue(req.deadline.plus_seconds(3)).empty());
  CHECK_THROWS_AS(
      journal.resolve("nope", true, received), UnknownHandle);
}

TEST_CASE("data-set files round trip and self-check", "[datastore]") {
  auto store = make_store();
  store.ingest_csv(kOrdersCsv, orders_mapping());
  auto reg = AttributeRegistry::with_defaults();
  auto j = dataset_to_json(*store.dataset("orders"));
  auto ds = dataset_from_json(j, reg);
  CHECK(canonical_dump(dataset_to_json(ds)) == canonical_dump(j));

  auto lying = j;
  lying["sensitivity"] = "special_category";
  CHECK_THROWS_AS(dataset_from_json(lying, reg), CorruptState);
}
