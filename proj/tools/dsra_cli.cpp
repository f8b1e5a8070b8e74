// Copyright 2026 the dsra authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

// Command-line front end. One binary drives every role: issue credentials,
// serve any actor over HTTP, run a complete rights request against a config
// directory, execute simulation scenarios, ingest CSV data into a store
// fixture, and validate policy files.
//
// Exit codes: 0 success, 1 scenario assertion failures, 2 usage or
// configuration errors, 3 corrupt persisted state.

#include <csignal>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "dsra/harness.hpp"

namespace {

using namespace dsra;

volatile std::sig_atomic_t g_stop = 0;

void print_json(const Json& j) { std::puts(canonical_dump(j).c_str()); }

/// Paths inside a config file are relative to the file, not to the caller's
/// working directory.
ActorConfig load_config_resolved(const std::string& path) {
  ActorConfig cfg = load_actor_config(path);
  std::filesystem::path base = std::filesystem::path(path).parent_path();
  auto fix = [&](std::string& p) {
    if (p.empty()) return;
    std::filesystem::path fp(p);
    if (fp.is_relative()) p = (base / fp).lexically_normal().string();
  };
  fix(cfg.registry_path);
  fix(cfg.key_path);
  fix(cfg.trust_path);
  fix(cfg.store_path);
  fix(cfg.policy_path);
  fix(cfg.state_dir);
  return cfg;
}

Scope parse_scope(const std::string& spec) {
  if (spec == "all") return Scope::everything();
  auto split = [](const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == sep) {
        out.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    out.push_back(cur);
    return out;
  };
  if (spec.rfind("datasets:", 0) == 0)
    return Scope::of_datasets(split(spec.substr(9), ','));
  if (spec.rfind("records:", 0) == 0) {
    std::vector<RecordHandle> handles;
    for (const auto& part : split(spec.substr(8), ',')) {
      auto slash = part.find('/');
      if (slash == std::string::npos)
        throw ConfigError("record scope entries look like dataset/record");
      handles.push_back(
          RecordHandle{part.substr(0, slash), part.substr(slash + 1)});
    }
    return Scope::of_records(std::move(handles));
  }
  throw ConfigError(
      "scope must be 'all', 'datasets:<id,...>', or 'records:<ds/rec,...>'");
}

int cmd_issue(const std::string& config_path, const std::string& person,
              std::int64_t valid_days, const std::string& selection,
              const std::string& out_path) {
  ActorConfig cfg = load_config_resolved(config_path);
  if (cfg.kind != "issuer" && cfg.kind != "issuer+idp")
    throw ConfigError("issue needs an issuer (or issuer+idp) config");
  InProcessTransport net;
  std::unique_ptr<Actor> actor = make_actor(cfg, &net);
  net.attach(*actor);
  Json body{{"person_id", person}, {"valid_days", valid_days}};
  if (!selection.empty()) {
    Json sel = Json::array();
    std::string cur;
    for (char c : selection + ",") {
      if (c == ',') {
        if (!cur.empty()) sel.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    body["selection"] = sel;
  }
  WireReply reply =
      actor->handle({"POST", "/issue", canonical_dump(body)});
  if (reply.status != 200) {
    std::fprintf(stderr, "issuance failed: %s\n", reply.body.c_str());
    return 2;
  }
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary);
    out << reply.body << "\n";
    std::fprintf(stderr, "bundle written to %s\n", out_path.c_str());
  } else {
    std::puts(reply.body.c_str());
  }
  return 0;
}

int cmd_serve(const std::string& config_path, const std::string& listen) {
  ActorConfig cfg = load_config_resolved(config_path);
  if (!listen.empty()) cfg.listen = listen;
  HttpTransport net;
  for (const auto& [id, url] : cfg.peers) net.add_peer(id, url);
  std::unique_ptr<Actor> actor = make_actor(cfg, &net);
  ActorServer server;
  server.start(*actor, cfg.listen.empty() ? "127.0.0.1:0" : cfg.listen);
  std::printf("%s listening on %s\n", cfg.id.c_str(), server.url().c_str());
  std::fflush(stdout);
  std::signal(SIGINT, [](int) { g_stop = 1; });
  std::signal(SIGTERM, [](int) { g_stop = 1; });
  while (!g_stop)
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server.stop();  // persists actor state before returning
  std::fprintf(stderr, "%s stopped\n", cfg.id.c_str());
  return 0;
}

int cmd_request(const std::string& config_dir, const std::string& person,
                const std::string& flow_name, const std::string& dsr_name,
                const std::string& scope_spec, const std::string& request_id,
                std::string handle) {
  Flow flow = flow_parse(flow_name);
  DsrType dsr = dsr_type_parse(dsr_name);
  Scope scope = parse_scope(scope_spec);
  std::filesystem::path dir(config_dir);

  InProcessTransport net;
  std::vector<std::unique_ptr<Actor>> actors;
  std::string issuer_id, idp_id, sp_id;
  WalletActor* wallet = nullptr;
  for (const char* name :
       {"issuer.conf", "idp.conf", "sp.conf", "wallet.conf"}) {
    std::filesystem::path path = dir / name;
    if (!std::filesystem::exists(path))
      throw FixtureMissing("config '" + path.string() + "' not found");
    ActorConfig cfg = load_config_resolved(path.string());
    actors.push_back(make_actor(cfg, &net));
    net.attach(*actors.back());
    if (cfg.kind == "issuer") issuer_id = cfg.id;
    if (cfg.kind == "idp") idp_id = cfg.id;
    if (cfg.kind == "sp") sp_id = cfg.id;
    if (cfg.kind == "wallet")
      wallet = dynamic_cast<WalletActor*>(actors.back().get());
  }
  if (!wallet) throw ConfigError("wallet.conf must define a wallet actor");

  wallet->acquire_bundle(issuer_id, person, {});
  WireReply reply;
  if (flow == Flow::fim) {
    if (handle.empty()) handle = "h-" + person;
    wallet->register_at_idp(idp_id, handle);
    reply = wallet->initiate_fim(idp_id, sp_id, request_id, dsr, scope,
                                 handle);
  } else {
    reply = wallet->initiate_ssi(sp_id, request_id, dsr, scope);
  }
  std::puts(reply.body.c_str());
  return reply.status == 200 ? 0 : 2;
}

int cmd_scenario_run(const std::string& file, const std::string& transport,
                     const std::string& out_dir, bool as_json) {
  Scenario sc = load_scenario_file(file);
  TransportKind kind = transport == "http" ? TransportKind::http
                                           : TransportKind::in_process;
  RunReport report =
      run_scenario(sc, out_dir, kind, /*throw_on_assertion=*/false);
  if (as_json)
    print_json(report.to_json());
  else
    std::fputs(report.summary().c_str(), stdout);
  return report.assertions_failed() > 0 ? 1 : 0;
}

int cmd_scenario_report(const std::string& transcript) {
  print_json(transcript_summary(transcript));
  return 0;
}

int cmd_store_ingest(const std::string& csv_path,
                     const std::string& mapping_path,
                     const std::string& out_path) {
  AttributeRegistry registry = AttributeRegistry::with_defaults();
  Store store(registry);
  IngestReport report = store.ingest_csv(
      read_text_file(csv_path),
      ingest_mapping_from_json(load_json_file(mapping_path)));
  if (!out_path.empty()) {
    Json datasets = Json::array();
    for (const auto& ds : store.datasets())
      datasets.push_back(dataset_to_json(ds));
    std::ofstream out(out_path, std::ios::binary);
    out << canonical_dump(Json{{"datasets", datasets}}) << "\n";
  }
  print_json(report.to_json());
  return 0;
}

int cmd_policy_check(const std::string& file) {
  MatchPolicy policy = policy_from_json(load_json_file(file));
  print_json(policy_to_json(policy));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "dsra: attribute-based authentication for data subject rights"};
  app.require_subcommand(1);
  int rc = 0;

  // issue ------------------------------------------------------------------
  auto* issue = app.add_subcommand(
      "issue", "Issue a credential bundle from an issuer config");
  std::string issue_config, issue_person, issue_selection, issue_out;
  std::int64_t issue_days = 365;
  issue->add_option("--config", issue_config, "issuer actor config file")
      ->required();
  issue->add_option("--person", issue_person, "person id in the registry")
      ->required();
  issue->add_option("--valid-days", issue_days, "validity window in days");
  issue->add_option("--selection", issue_selection,
                    "comma-separated attribute ids (default: all)");
  issue->add_option("--out", issue_out, "write the bundle to this file");
  issue->callback([&] {
    rc = cmd_issue(issue_config, issue_person, issue_days, issue_selection,
                   issue_out);
  });

  // serve ------------------------------------------------------------------
  auto* serve = app.add_subcommand(
      "serve", "Serve one actor over HTTP until SIGINT/SIGTERM");
  std::string serve_config, serve_listen;
  serve->add_option("--config", serve_config, "actor config file")
      ->required();
  serve->add_option("--listen", serve_listen,
                    "host:port override (port 0 picks a free port)");
  serve->callback([&] { rc = cmd_serve(serve_config, serve_listen); });

  // request ----------------------------------------------------------------
  auto* request = app.add_subcommand(
      "request",
      "Run one rights request end to end against a config directory");
  std::string req_dir, req_person, req_flow = "ssi", req_dsr = "access";
  std::string req_scope = "all", req_id = "req-1", req_handle;
  request
      ->add_option("--configs", req_dir,
                   "directory with issuer/idp/sp/wallet .conf files")
      ->required();
  request->add_option("--person", req_person, "data subject person id")
      ->required();
  request->add_option("--flow", req_flow, "ssi or fim");
  request->add_option("--dsr", req_dsr, "access or erasure");
  request->add_option("--scope", req_scope,
                      "all | datasets:<id,..> | records:<ds/rec,..>");
  request->add_option("--request-id", req_id, "request identifier");
  request->add_option("--handle", req_handle,
                      "mediated-flow handle (default: h-<person>)");
  request->callback([&] {
    rc = cmd_request(req_dir, req_person, req_flow, req_dsr, req_scope,
                     req_id, req_handle);
  });

  // scenario ---------------------------------------------------------------
  auto* scenario =
      app.add_subcommand("scenario", "Simulation scenarios");
  scenario->require_subcommand(1);
  auto* sc_run = scenario->add_subcommand(
      "run", "Run a scenario file and print its report");
  std::string sc_file, sc_transport = "inproc", sc_out = "runs";
  bool sc_json = false;
  sc_run->add_option("file", sc_file, "scenario JSON file")->required();
  sc_run->add_option("--transport", sc_transport, "inproc or http")
      ->check(CLI::IsMember({"inproc", "http"}));
  sc_run->add_option("--out", sc_out,
                     "directory for transcript and report files");
  sc_run->add_flag("--json", sc_json, "print the full JSON report");
  sc_run->callback(
      [&] { rc = cmd_scenario_run(sc_file, sc_transport, sc_out, sc_json); });

  auto* sc_report = scenario->add_subcommand(
      "report", "Summarize a previously written transcript");
  std::string sc_transcript;
  sc_report->add_option("transcript", sc_transcript, "transcript .jsonl file")
      ->required();
  sc_report->callback([&] { rc = cmd_scenario_report(sc_transcript); });

  // store ------------------------------------------------------------------
  auto* store_cmd = app.add_subcommand("store", "Store utilities");
  store_cmd->require_subcommand(1);
  auto* ingest = store_cmd->add_subcommand(
      "ingest", "Ingest a CSV with a mapping sidecar");
  std::string ing_csv, ing_mapping, ing_out;
  ingest->add_option("--csv", ing_csv, "source CSV file")->required();
  ingest->add_option("--mapping", ing_mapping, "mapping JSON file")
      ->required();
  ingest->add_option("--out", ing_out, "write the store fixture here");
  ingest->callback(
      [&] { rc = cmd_store_ingest(ing_csv, ing_mapping, ing_out); });

  // policy -----------------------------------------------------------------
  auto* policy_cmd = app.add_subcommand("policy", "Policy utilities");
  policy_cmd->require_subcommand(1);
  auto* check = policy_cmd->add_subcommand(
      "check", "Validate a policy file and print its normal form");
  std::string pol_file;
  check->add_option("file", pol_file, "policy JSON file")->required();
  check->callback([&] { rc = cmd_policy_check(pol_file); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const CorruptState& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const FixtureMissing& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return rc;
}
