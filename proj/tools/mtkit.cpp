// Pipeline driver: one binary, one subcommand per stage. All stages are
// deterministic for a fixed config and seed.

#include <atomic>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mtkit/config.hpp"
#include "mtkit/corpus.hpp"
#include "mtkit/distill.hpp"
#include "mtkit/evalprep.hpp"
#include "mtkit/http_backend.hpp"
#include "mtkit/mixture.hpp"
#include "mtkit/prompting.hpp"
#include "mtkit/rewards.hpp"

namespace {

using nlohmann::json;

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return json::parse(in);
}

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

std::ofstream open_out(const std::string& path) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

struct Globals {
  std::string config_path;
  uint64_t seed = 0;
  bool seed_set = false;
  size_t jobs = 1;
  std::string out_root;
  bool dry_run = false;

  mtkit::config::PipelineConfig load() const {
    mtkit::config::PipelineConfig cfg;
    if (!config_path.empty()) cfg = mtkit::config::PipelineConfig::load(config_path);
    if (seed_set) cfg.seed = seed;  // flags win over config
    if (jobs > 1) cfg.jobs = jobs;
    if (!out_root.empty()) cfg.out_root = out_root;
    return cfg;
  }
};

void plan(const Globals& g, const std::string& what) {
  if (g.dry_run) {
    std::cout << json{{"plan", what}, {"dry_run", true}}.dump() << "\n";
    std::exit(0);
  }
}

// Parallel map over an index range; results collected in index order.
template <typename Fn>
void parallel_for(size_t n, size_t jobs, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> workers;
  for (size_t w = 0; w < std::min(jobs, n); ++w)
    workers.emplace_back([&] {
      for (size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : workers) t.join();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distillation and reward-engineering pipeline for MT"};
  app.require_subcommand(1);

  Globals g;
  app.add_option("--config", g.config_path, "Pipeline config file (JSON)");
  app.add_option("--seed", g.seed, "Global seed (overrides config)")
      ->each([&](const std::string&) { g.seed_set = true; });
  app.add_option("--jobs", g.jobs, "Worker threads for per-segment stages");
  app.add_option("--out", g.out_root, "Output root directory");
  app.add_flag("--dry-run", g.dry_run, "Validate and print the plan only");

  // --- ingest ---
  auto* c_ingest = app.add_subcommand("ingest", "Segment a text file");
  std::string in_path, lang = "en", mode = "sentence", out_path;
  size_t blob_cap = mtkit::corpus::kDefaultBlobTokenCap;
  c_ingest->add_option("--in", in_path, "UTF-8 text, one record per line")->required();
  c_ingest->add_option("--lang", lang, "Language code");
  c_ingest->add_option("--mode", mode, "sentence | blob");
  c_ingest->add_option("--blob-cap", blob_cap, "Blob token cap");
  c_ingest->add_option("--out-file", out_path, "Segments JSONL")->required();

  // --- bucket ---
  auto* c_bucket = app.add_subcommand("bucket", "Bucket segments by length");
  std::string seg_path, boundaries_csv, bucket_out;
  c_bucket->add_option("--in", seg_path, "Segments JSONL")->required();
  c_bucket->add_option("--boundaries", boundaries_csv,
                       "Comma-separated ascending bounds (default powers of two)");
  c_bucket->add_option("--out-file", bucket_out, "Buckets JSON")->required();

  // --- sample ---
  auto* c_sample = app.add_subcommand("sample", "Sample a source pool");
  std::string sm_segments, sm_buckets, sm_out, sm_src = "en", sm_tgt = "de-DE";
  size_t sm_target = 1000000, sm_quota = SIZE_MAX;
  c_sample->add_option("--segments", sm_segments)->required();
  c_sample->add_option("--buckets", sm_buckets)->required();
  c_sample->add_option("--target-size", sm_target);
  c_sample->add_option("--quota", sm_quota, "Uniform per-bucket quota");
  c_sample->add_option("--source-lang", sm_src);
  c_sample->add_option("--target-lang", sm_tgt);
  c_sample->add_option("--out-file", sm_out, "Pool JSONL (+ .meta.json sidecar)")
      ->required();

  // --- prefilter ---
  auto* c_pre = app.add_subcommand(
      "prefilter", "2-sample delta prefilter over a source pool");
  std::string pf_pool, pf_out, pf_selected;
  size_t pf_k = 0;
  c_pre->add_option("--pool", pf_pool, "Pool JSONL")->required();
  c_pre->add_option("--k", pf_k, "Segments to keep (default cap*2)");
  c_pre->add_option("--out-file", pf_out, "Prefilter records JSONL")->required();
  c_pre->add_option("--selected", pf_selected, "Selected segment ids JSON");

  // --- distill ---
  auto* c_dist = app.add_subcommand(
      "distill", "Best-of-N selection + formatting filter + emission");
  std::string ds_sources, ds_out_dir;
  size_t ds_n = 128, ds_cap = 10000;
  c_dist->add_option("--sources", ds_sources, "Pool JSONL")->required();
  c_dist->add_option("--n", ds_n, "Samples per segment");
  c_dist->add_option("--cap", ds_cap, "Max emitted examples per language pair");
  c_dist->add_option("--out-dir", ds_out_dir, "Output directory")->required();

  // --- filter ---
  auto* c_filter = app.add_subcommand("filter", "Formatting filter on a dataset");
  std::string fl_in, fl_out;
  c_filter->add_option("--in", fl_in, "Dataset JSONL")->required();
  c_filter->add_option("--out-file", fl_out, "Accepted records JSONL")->required();

  // --- emit ---
  auto* c_emit = app.add_subcommand("emit", "Emit capped dataset shards");
  std::string em_in, em_dir;
  size_t em_cap = 10000;
  c_emit->add_option("--in", em_in, "Accepted records JSONL")->required();
  c_emit->add_option("--cap", em_cap, "Cap per language pair");
  c_emit->add_option("--out-dir", em_dir)->required();

  // --- mix ---
  auto* c_mix = app.add_subcommand("mix", "Compose a training mixture");
  std::string mx_spec, mx_out, mx_report;
  size_t mx_tokens = 100000;
  c_mix->add_option("--spec", mx_spec, "Mixture spec JSON")->required();
  c_mix->add_option("--total-tokens", mx_tokens);
  c_mix->add_option("--out-file", mx_out, "Interleaved stream JSONL")->required();
  c_mix->add_option("--report", mx_report, "MixReport JSON");

  // --- rewards ---
  auto* c_rw = app.add_subcommand("rewards", "Compute batch-normalized advantages");
  std::string rw_in, rw_out;
  double rw_eps = 1e-8;
  c_rw->add_option("--in", rw_in, "Sequence records JSONL")->required();
  c_rw->add_option("--out-file", rw_out, "Advantages JSONL")->required();
  c_rw->add_option("--epsilon", rw_eps);

  // --- evalprep ---
  auto* c_ev = app.add_subcommand(
      "evalprep", "Chunk documents and assign raters (pseudo-SxS)");
  std::string ev_docs, ev_chunks_out, ev_assign_out;
  std::vector<std::string> ev_systems, ev_raters;
  c_ev->add_option("--docs", ev_docs, "Documents JSONL")->required();
  c_ev->add_option("--chunks-out", ev_chunks_out, "Chunks JSONL")->required();
  c_ev->add_option("--systems", ev_systems)->delimiter(',');
  c_ev->add_option("--raters", ev_raters)->delimiter(',');
  c_ev->add_option("--assignment-out", ev_assign_out, "Assignment JSON");

  // --- report ---
  auto* c_rep = app.add_subcommand("report", "Aggregate MQM annotations");
  std::string rp_ann, rp_json_out;
  c_rep->add_option("--annotations", rp_ann, "Annotations JSONL")->required();
  c_rep->add_option("--out-json", rp_json_out, "Report JSON");

  // --- mock-serve ---
  auto* c_srv = app.add_subcommand("mock-serve", "Run the deterministic mock backend");
  std::string srv_host = "127.0.0.1";
  int srv_port = 8077;
  c_srv->add_option("--host", srv_host);
  c_srv->add_option("--port", srv_port);

  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = g.load();

    if (*c_ingest) {
      plan(g, "ingest " + in_path);
      auto m = mode == "blob" ? mtkit::corpus::IngestMode::kBlob
                              : mtkit::corpus::IngestMode::kSentence;
      if (mode != "blob" && mode != "sentence")
        throw mtkit::config::ConfigKeyError("mode", "expected sentence|blob");
      auto res = mtkit::corpus::ingest_file(in_path, lang, m,
                                            mtkit::default_tokenizer(), blob_cap);
      auto out = open_out(out_path);
      mtkit::corpus::write_segments(out, res.segments);
      for (const auto& e : res.errors)
        std::cerr << json{{"line", e.line_number}, {"error", e.message}}.dump()
                  << "\n";
      std::cout << json{{"segments", res.segments.size()},
                        {"errors", res.errors.size()},
                        {"blank_lines", res.blank_lines_skipped}}
                       .dump()
                << "\n";
    } else if (*c_bucket) {
      plan(g, "bucket " + seg_path);
      std::ifstream in(seg_path, std::ios::binary);
      if (!in) throw std::runtime_error("cannot open " + seg_path);
      auto segs = mtkit::corpus::read_segments(in);
      std::vector<size_t> bounds;
      if (boundaries_csv.empty()) {
        bounds = mtkit::corpus::default_boundaries();
      } else {
        std::stringstream ss(boundaries_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) bounds.push_back(std::stoul(tok));
      }
      auto buckets = mtkit::corpus::bucket_by_length(segs, bounds);
      json jb = json::array();
      for (const auto& b : buckets)
        jb.push_back({{"lower", b.lower},
                      {"upper", b.upper == SIZE_MAX ? json(nullptr) : json(b.upper)},
                      {"members", b.members}});
      open_out(bucket_out) << json{{"boundaries", bounds}, {"buckets", jb}}.dump(2)
                           << "\n";
      std::cout << json{{"buckets", buckets.size()}, {"segments", segs.size()}}.dump()
                << "\n";
    } else if (*c_sample) {
      plan(g, "sample " + sm_segments);
      std::ifstream in(sm_segments, std::ios::binary);
      if (!in) throw std::runtime_error("cannot open " + sm_segments);
      auto segs = mtkit::corpus::read_segments(in);
      auto jb = read_json_file(sm_buckets);
      std::vector<mtkit::corpus::LengthBucket> buckets;
      for (const auto& b : jb.at("buckets")) {
        mtkit::corpus::LengthBucket lb;
        lb.lower = b.at("lower").get<size_t>();
        lb.upper = b.at("upper").is_null() ? SIZE_MAX : b.at("upper").get<size_t>();
        lb.members = b.at("members").get<std::vector<std::string>>();
        buckets.push_back(std::move(lb));
      }
      auto pool = mtkit::corpus::sample_pool(segs, buckets, {}, sm_quota, cfg.seed,
                                             sm_target, sm_src, sm_tgt);
      auto out = open_out(sm_out);
      mtkit::corpus::write_segments(out, pool.segments);
      json shortfalls = json::object();
      for (const auto& [lower, missing] : pool.shortfalls)
        shortfalls[std::to_string(lower)] = missing;
      open_out(sm_out + ".meta.json")
          << json{{"lang_pair", {pool.source_lang, pool.target_lang}},
                  {"seed", pool.seed},
                  {"boundaries", jb.at("boundaries")},
                  {"quota", sm_quota == SIZE_MAX ? json(nullptr) : json(sm_quota)},
                  {"shortfalls", shortfalls}}
                 .dump(2)
          << "\n";
      std::cout << json{{"pool_size", pool.segments.size()}}.dump() << "\n";
    } else if (*c_pre || *c_dist) {
      const std::string pool_path = *c_pre ? pf_pool : ds_sources;
      plan(g, (*c_pre ? "prefilter " : "distill ") + pool_path);
      std::ifstream in(pool_path, std::ios::binary);
      if (!in) throw std::runtime_error("cannot open " + pool_path);
      mtkit::corpus::SourcePool pool;
      pool.segments = mtkit::corpus::read_segments(in);
      std::string src_code = "en", tgt_code = "de-DE", ds_mode = "sentence";
      if (std::filesystem::exists(pool_path + ".meta.json")) {
        auto meta = read_json_file(pool_path + ".meta.json");
        src_code = meta.at("lang_pair").at(0).get<std::string>();
        tgt_code = meta.at("lang_pair").at(1).get<std::string>();
        ds_mode = meta.value("mode", "sentence");
      }
      pool.source_lang = src_code;
      pool.target_lang = tgt_code;

      auto backend = mtkit::config::make_backend(cfg.section("backend"), cfg.seed);
      auto registry = mtkit::config::registry_from(cfg.section("prompting"));
      mtkit::distill::QeScorer qe{backend.get()};
      auto prompt_fn = [&](const mtkit::corpus::Segment& seg) {
        return mtkit::prompting::render_prompt(registry, src_code, tgt_code,
                                               seg.text);
      };

      if (*c_pre) {
        if (pf_k == 0) pf_k = ds_cap * 2;
        auto res = mtkit::distill::prefilter(pool, prompt_fn, *backend, qe, pf_k);
        auto out = open_out(pf_out);
        for (const auto& r : res.records)
          out << json{{"segment_id", r.segment_id},
                      {"greedy_score", r.greedy_score},
                      {"sampled_score", r.sampled_score},
                      {"delta", r.delta},
                      {"error", r.error}}
                     .dump()
              << "\n";
        if (!pf_selected.empty())
          open_out(pf_selected) << json(res.selected).dump(2) << "\n";
        std::cout << json{{"selected", res.selected.size()},
                          {"records", res.records.size()}}
                         .dump()
                  << "\n";
      } else {
        std::filesystem::create_directories(ds_out_dir);
        const size_t n = pool.segments.size();
        std::vector<mtkit::distill::BestOfNResult> results(n);
        parallel_for(n, cfg.jobs, [&](size_t i) {
          const auto& seg = pool.segments[i];
          results[i] = mtkit::distill::best_of_n(seg, prompt_fn(seg), ds_n,
                                                 *backend, qe);
        });
        auto audit = open_out(ds_out_dir + "/audit.jsonl");
        std::vector<mtkit::distill::ScoredCandidate> accepted;
        size_t rejects = 0, failures = 0;
        for (size_t i = 0; i < n; ++i) {
          for (const auto& e : results[i].audit)
            audit << mtkit::distill::to_json(e).dump() << "\n";
          if (!results[i].best) {
            ++failures;
            continue;
          }
          auto sc = *results[i].best;
          sc.source_lang = src_code;
          sc.target_lang = tgt_code;
          sc.mode = ds_mode;
          auto verdict = mtkit::distill::format_filter(
              sc, prompt_fn(pool.segments[i]));
          if (!verdict.pass) {
            ++rejects;
            continue;
          }
          accepted.push_back(std::move(sc));
        }
        auto report =
            mtkit::distill::emit_dataset(std::move(accepted), ds_out_dir, ds_cap);
        json kept = json::object();
        for (const auto& [pair, cnt] : report.kept_per_pair) kept[pair] = cnt;
        std::cout << json{{"kept", kept},
                          {"filter_rejects", rejects},
                          {"generation_failures", failures}}
                         .dump()
                  << "\n";
      }
    } else if (*c_filter) {
      plan(g, "filter " + fl_in);
      auto out = open_out(fl_out);
      size_t kept = 0, rejected = 0;
      for (const auto& j : read_jsonl(fl_in)) {
        mtkit::distill::ScoredCandidate sc;
        sc.candidate.text = j.at("target_text").get<std::string>();
        sc.source_text = j.value("source_text", "");
        auto v = mtkit::distill::format_filter(sc, /*prompt=*/"");
        if (v.pass) {
          out << j.dump() << "\n";
          ++kept;
        } else {
          ++rejected;
          std::cerr << json{{"reject", v.reason}}.dump() << "\n";
        }
      }
      std::cout << json{{"kept", kept}, {"rejected", rejected}}.dump() << "\n";
    } else if (*c_emit) {
      plan(g, "emit " + em_in);
      std::vector<mtkit::distill::ScoredCandidate> recs;
      for (const auto& j : read_jsonl(em_in)) {
        mtkit::distill::ScoredCandidate sc;
        sc.source_text = j.at("source_text").get<std::string>();
        sc.candidate.text = j.at("target_text").get<std::string>();
        sc.candidate.segment_id = j.at("provenance").at("segment_id");
        sc.candidate.sample_index = j.at("provenance").at("sample_index");
        std::string pair = j.at("lang_pair").get<std::string>();
        auto dash = pair.find('-');
        sc.source_lang = pair.substr(0, dash);
        sc.target_lang = pair.substr(dash + 1);
        sc.mode = j.value("mode", "sentence");
        sc.qe_raw = j.at("qe_raw").get<double>();
        sc.qe_rescaled = j.at("qe_rescaled").get<double>();
        recs.push_back(std::move(sc));
      }
      auto report = mtkit::distill::emit_dataset(std::move(recs), em_dir, em_cap);
      std::cout << json{{"shards", report.shard_paths}}.dump() << "\n";
    } else if (*c_mix) {
      plan(g, "mix " + mx_spec);
      auto spec = mtkit::mixture::load_spec(read_json_file(mx_spec));
      auto res = mtkit::mixture::compose(spec, mx_tokens);
      auto out = open_out(mx_out);
      mtkit::mixture::write_stream(out, res.stream);
      if (!mx_report.empty())
        open_out(mx_report) << res.report.to_json().dump(2) << "\n";
      std::cout << res.report.to_json().dump() << "\n";
    } else if (*c_rw) {
      plan(g, "rewards " + rw_in);
      std::vector<mtkit::rewards::SequenceRecord> records;
      for (const auto& j : read_jsonl(rw_in))
        records.push_back(mtkit::rewards::sequence_record_from_json(j));
      auto weights = mtkit::config::mqm_weights_from(cfg.section("mqm_weights"));
      std::vector<std::string> ids;
      for (const auto& r : records) ids.push_back(r.sequence_id);
      mtkit::rewards::Warnings warn;
      auto batch = mtkit::rewards::compute_advantages(std::move(records), weights,
                                                      1.0, rw_eps, &warn);
      auto out = open_out(rw_out);
      for (size_t i = 0; i < batch.sequences.size(); ++i)
        out << json{{"sequence_id", ids[i]}, {"advantages", batch.sequences[i]}}
                   .dump()
            << "\n";
      for (const auto& w : warn.messages)
        std::cerr << json{{"warning", w}}.dump() << "\n";
      std::cout << json{{"sequences", batch.sequences.size()}}.dump() << "\n";
    } else if (*c_ev) {
      plan(g, "evalprep " + ev_docs);
      auto out = open_out(ev_chunks_out);
      std::vector<mtkit::evalprep::Chunk> all_chunks;
      for (const auto& j : read_jsonl(ev_docs)) {
        auto doc = mtkit::evalprep::document_from_json(j);
        auto res = mtkit::evalprep::chunk_document(doc);
        if (res.skipped) {
          std::cerr << json{{"skipped", doc.doc_id}, {"reason", res.skip_reason}}
                           .dump()
                    << "\n";
          continue;
        }
        for (const auto& w : res.warnings)
          std::cerr << json{{"warning", w}}.dump() << "\n";
        for (const auto& c : res.chunks) {
          out << json{{"chunk_id", c.id()},
                      {"doc_id", c.doc_id},
                      {"chunk_index", c.chunk_index},
                      {"sentence_count", c.sentence_count},
                      {"paragraphs", c.paragraphs}}
                     .dump()
              << "\n";
          all_chunks.push_back(c);
        }
      }
      if (!ev_assign_out.empty()) {
        auto a = mtkit::evalprep::assign_raters(all_chunks, ev_systems, ev_raters,
                                                cfg.seed);
        json jr = json::object();
        for (const auto& [chunk, rater] : a.rater_by_chunk) jr[chunk] = rater;
        open_out(ev_assign_out)
            << json{{"raters", jr}, {"systems", a.systems}}.dump(2) << "\n";
      }
      std::cout << json{{"chunks", all_chunks.size()}}.dump() << "\n";
    } else if (*c_rep) {
      plan(g, "report " + rp_ann);
      std::vector<mtkit::evalprep::Annotation> anns;
      for (const auto& j : read_jsonl(rp_ann))
        anns.push_back(mtkit::evalprep::annotation_from_json(j));
      auto weights = mtkit::config::mqm_weights_from(cfg.section("mqm_weights"));
      auto report = mtkit::evalprep::aggregate(anns, weights);
      std::cout << mtkit::evalprep::report_to_text(report);
      if (!rp_json_out.empty())
        open_out(rp_json_out)
            << mtkit::evalprep::report_to_json(report).dump(2) << "\n";
    } else if (*c_srv) {
      plan(g, "mock-serve");
      mtkit::backend::MockBackend mock(cfg.seed);
      mtkit::backend::MockServer server(mock);
      std::cerr << json{{"listening", srv_host + ":" + std::to_string(srv_port)}}
                       .dump()
                << "\n";
      if (!server.listen(srv_host, srv_port))
        throw std::runtime_error("mock-serve: cannot bind " + srv_host + ":" +
                                 std::to_string(srv_port));
    }
    return 0;
  } catch (const mtkit::config::ConfigKeyError& e) {
    std::cerr << json{{"error", e.what()}, {"key", e.key}}.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
}
