// Copyright 2026 The hiiforge Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <exception>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hiiforge/bench/moh_bench.hpp"
#include "hiiforge/core/error.hpp"
#include "hiiforge/core/jsonl.hpp"
#include "hiiforge/core/records.hpp"
#include "hiiforge/filter/hii_filter.hpp"
#include "hiiforge/mask/mask_forge.hpp"
#include "hiiforge/math/dpo.hpp"
#include "hiiforge/pipeline/config.hpp"
#include "hiiforge/pipeline/log.hpp"
#include "hiiforge/prefs/pref_builder.hpp"
#include "hiiforge/protocol/parallel.hpp"

namespace hiiforge::pipeline {

enum ExitCode : int { kExitOk = 0, kExitItemFailures = 1, kExitFatal = 2 };

namespace fs = std::filesystem;

// "out/masked.jsonl" + "skipped" -> "out/masked.skipped.jsonl".
inline fs::path sidecar_path(const fs::path& out, std::string_view tag) {
  fs::path stem = out;
  if (stem.extension() == ".jsonl" || stem.extension() == ".json") stem.replace_extension();
  stem += "." + std::string(tag) + ".jsonl";
  return stem;
}

// Errors that abort a whole command rather than a single item.
inline bool is_fatal(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const ConfigError&) {
    return true;
  } catch (const ProtocolError&) {
    return true;
  } catch (const TransportError&) {
    return true;
  } catch (...) {
    return false;
  }
}

inline std::string describe(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const std::exception& ex) {
    return ex.what();
  } catch (...) {
    return "unknown error";
  }
}

// Rethrows the first fatal error (input order); logs and counts the rest.
template <class T, class R, class IdOf>
std::vector<R> gather(const std::vector<T>& items, std::vector<Outcome<R>>& outcomes,
                      EventLog& log, std::string_view stage, IdOf id_of, int& failures) {
  for (const auto& o : outcomes) {
    if (o.error && is_fatal(o.error)) std::rethrow_exception(o.error);
  }
  std::vector<R> out;
  out.reserve(outcomes.size());
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].error) {
      ++failures;
      log.error("item_failed", {{"stage", std::string(stage)},
                                {"id", id_of(items[i])},
                                {"message", describe(outcomes[i].error)}});
    } else {
      out.push_back(std::move(*outcomes[i].value));
    }
  }
  return out;
}

// Runs a command body, mapping fatal errors to exit code 2.
template <class Fn>
int guarded(EventLog& log, std::string_view command, Fn body) {
  try {
    return body();
  } catch (const TransportError& e) {
    log.error("transport_error", {{"command", std::string(command)}, {"message", e.what()}});
  } catch (const ProtocolError& e) {
    log.error("protocol_error", {{"command", std::string(command)}, {"message", e.what()}});
  } catch (const ConfigError& e) {
    log.error("config_error", {{"command", std::string(command)}, {"message", e.what()}});
  } catch (const Error& e) {
    log.error("input_error", {{"command", std::string(command)}, {"message", e.what()}});
  } catch (const std::exception& e) {
    log.error("internal_error", {{"command", std::string(command)}, {"message", e.what()}});
  }
  return kExitFatal;
}

inline int finish(EventLog& log, std::string_view command, int failures, Json fields) {
  fields["command"] = std::string(command);
  fields["failed_items"] = failures;
  log.info("done", fields);
  return failures > 0 ? kExitItemFailures : kExitOk;
}

// ---------------------------------------------------------------------------
// synth: images.jsonl -> masked.jsonl (+ PNGs, skipped and audit sidecars)

struct SynthItem {
  std::vector<MaskedImage> masked;
  std::vector<Json> skipped;
  std::vector<Json> audit;
};

inline SynthItem synth_one(const ImageRecord& record, const PipelineConfig& cfg,
                           mask::DetectorContext ctx) {
  const fs::path source = cfg.resolve(record.source_path);
  const Image image = load_png(source);
  if (image.width() != record.width || image.height() != record.height) {
    throw ValidationError("width", "record says " + std::to_string(record.width) + "x" +
                                       std::to_string(record.height) + " but " + source.string() +
                                       " is " + std::to_string(image.width()) + "x" +
                                       std::to_string(image.height()));
  }
  SynthItem out;
  for (const auto& candidate : mask::detect_candidates(record, image, source, ctx, cfg.mask)) {
    auto result = mask::iterative_mask(record, image, source, candidate.cls, ctx, cfg.mask);
    out.audit.push_back(mask::audit_json(record, candidate.cls, result));
    if (result.masked) {
      save_png(result.image, cfg.resolve(result.masked->output_path));
      out.masked.push_back(std::move(*result.masked));
    } else {
      out.skipped.push_back({{"image_id", record.image_id},
                             {"class", std::string(candidate.cls.name())},
                             {"status", std::string(mask::to_string(result.status))},
                             {"rounds", result.rounds.size()}});
    }
  }
  return out;
}

inline int cmd_synth(const PipelineConfig& cfg, const fs::path& images_path,
                     const fs::path& out_path, EventLog& log) {
  return guarded(log, "synth", [&] {
    const auto records = read_records<ImageRecord>(images_path);
    std::vector<MaskedImage> masked;
    std::vector<Json> skipped;
    std::vector<Json> audit;
    int failures = 0;
    if (!records.empty()) {
      const auto detector = make_detector(cfg);
      const auto dict = load_dictionary(cfg);
      const mask::DetectorContext ctx{*detector, dict, cfg.image_transport};
      auto outcomes = parallel_map(records, static_cast<std::size_t>(cfg.parallelism),
                                   [&](const ImageRecord& r) { return synth_one(r, cfg, ctx); });
      for (auto& item : gather(records, outcomes, log, "synth",
                               [](const ImageRecord& r) { return r.image_id; }, failures)) {
        std::ranges::move(item.masked, std::back_inserter(masked));
        std::ranges::move(item.skipped, std::back_inserter(skipped));
        std::ranges::move(item.audit, std::back_inserter(audit));
      }
    }
    std::ranges::sort(masked, {}, &MaskedImage::masked_image_id);
    write_jsonl(out_path, masked);
    std::string skipped_text;
    for (const auto& s : skipped) skipped_text += s.dump() + "\n";
    write_text_file(sidecar_path(out_path, "skipped"), skipped_text);
    std::string audit_text;
    for (const auto& a : audit) audit_text += a.dump() + "\n";
    write_text_file(sidecar_path(out_path, "audit"), audit_text);
    log.summary("synth: " + std::to_string(records.size()) + " images, " +
                std::to_string(masked.size()) + " masked, " + std::to_string(skipped.size()) +
                " skipped, " + std::to_string(failures) + " failed");
    return finish(log, "synth", failures,
                  {{"images", records.size()}, {"masked", masked.size()}, {"skipped", skipped.size()}});
  });
}

// ---------------------------------------------------------------------------
// filter: masked.jsonl -> hii.NAME.jsonl (+ responses sidecar)

inline filter::ImageAccess image_access(const PipelineConfig& cfg) {
  return filter::ImageAccess{cfg.dataset_root, cfg.image_transport};
}

inline int cmd_filter(const PipelineConfig& cfg, const fs::path& masked_path,
                      const std::string& model_name, const fs::path& out_path, EventLog& log) {
  return guarded(log, "filter", [&] {
    const auto masked = read_records<MaskedImage>(masked_path);
    const auto model = make_vlm(cfg, model_name);
    std::vector<HiiRecord> accepted;
    std::vector<filter::FilterAudit> audits;
    int failures = 0;
    if (!masked.empty()) {
      const auto dict = load_dictionary(cfg);
      const auto access = image_access(cfg);
      auto outcomes = parallel_map(masked, static_cast<std::size_t>(cfg.parallelism),
                                   [&](const MaskedImage& m) {
                                     return filter::filter_hii(m, model_name, *model, dict, cfg.filter, access);
                                   });
      for (auto& r : gather(masked, outcomes, log, "filter",
                            [](const MaskedImage& m) { return m.masked_image_id; }, failures)) {
        if (r.record) accepted.push_back(std::move(*r.record));
        audits.push_back(std::move(r.audit));
      }
    }
    std::ranges::sort(accepted, {}, [](const HiiRecord& h) { return h.masked_image.masked_image_id; });
    std::ranges::sort(audits, {}, &filter::FilterAudit::masked_image_id);
    write_jsonl(out_path, accepted);
    write_jsonl(sidecar_path(out_path, "responses"), audits);
    log.summary("filter[" + model_name + "]: " + std::to_string(masked.size()) + " masked, " +
                std::to_string(accepted.size()) + " certified, " + std::to_string(failures) + " failed");
    return finish(log, "filter", failures,
                  {{"model", model_name}, {"masked", masked.size()}, {"accepted", accepted.size()}});
  });
}

// ---------------------------------------------------------------------------
// intersect: hii.A.jsonl hii.B.jsonl ... + scenes.jsonl -> moh_items.jsonl

inline int cmd_intersect(const std::vector<fs::path>& hii_paths, const fs::path& scenes_path,
                         const fs::path& out_path, EventLog& log) {
  return guarded(log, "intersect", [&] {
    if (hii_paths.size() < 2) throw ConfigError("intersect needs at least two HII files");
    std::vector<std::vector<HiiRecord>> sets;
    for (const auto& p : hii_paths) sets.push_back(read_records<HiiRecord>(p));
    std::map<std::string, Scene> scenes;
    for (const auto& l : read_jsonl<SceneAssignment>(scenes_path)) {
      if (!scenes.emplace(l.record.image_id, l.record.scene).second) {
        throw ParseError(scenes_path.string(), l.line, "image_id",
                         "duplicate scene label for '" + l.record.image_id + "'");
      }
    }
    std::vector<MohItem> items;
    int failures = 0;
    for (auto& m : filter::intersect_hii(sets)) {
      const auto it = scenes.find(m.parent);
      if (it == scenes.end()) {
        ++failures;
        log.error("item_failed", {{"stage", "intersect"},
                                  {"id", m.masked_image_id},
                                  {"message", "no scene label for parent image '" + m.parent + "'"}});
        continue;
      }
      const CanonicalClass cls = m.masked_class;
      items.push_back(MohItem{std::move(m), cls, it->second});
    }
    write_jsonl(out_path, items);
    log.summary("intersect: " + std::to_string(items.size()) + " benchmark items from " +
                std::to_string(sets.size()) + " model sets");
    return finish(log, "intersect", failures, {{"items", items.size()}});
  });
}

// ---------------------------------------------------------------------------
// bench: moh_items.jsonl -> report JSON (+ outcomes JSONL, optional CSV)

struct BenchOutputs {
  fs::path report;
  std::optional<fs::path> outcomes;  // default: sidecar of report
  std::optional<fs::path> csv;
};

inline int cmd_bench(const PipelineConfig& cfg, const fs::path& items_path,
                     const std::string& model_name, bench::Task task, const BenchOutputs& outputs,
                     EventLog& log) {
  return guarded(log, "bench", [&] {
    const auto items = read_records<MohItem>(items_path);
    if (items.empty()) throw ConfigError("bench: " + items_path.string() + " has no items");
    const auto model = make_vlm(cfg, model_name);
    const auto dict = load_dictionary(cfg);
    const auto access = image_access(cfg);
    auto outcomes = parallel_map(items, static_cast<std::size_t>(cfg.parallelism), [&](const MohItem& item) {
      bench::ItemOutcome o;
      o.masked_image_id = item.masked_image.masked_image_id;
      o.masked_class = item.masked_class;
      o.scene = item.scene;
      if (bench::runs_discriminative(task)) o.discriminative = bench::discriminative_probe(item, *model, access, cfg.bench);
      if (bench::runs_generative(task)) o.generative = bench::generative_probe(item, *model, dict, access, cfg.bench);
      return o;
    });
    int failures = 0;
    auto done = gather(items, outcomes, log, "bench",
                       [](const MohItem& i) { return i.masked_image.masked_image_id; }, failures);
    std::ranges::stable_sort(done, {}, &bench::ItemOutcome::masked_image_id);
    if (done.empty()) throw Error("bench: every item failed");
    const auto report = bench::build_report(model_name, task, done, cfg.bench.top_k);
    write_jsonl(outputs.outcomes.value_or(sidecar_path(outputs.report, "outcomes")), done);
    write_json_file(outputs.report, bench::to_json(report));
    if (outputs.csv) write_text_file(*outputs.csv, bench::co_occurrence_csv(report.co_occurrence));
    std::string line = "bench[" + model_name + "]: " + std::to_string(report.n_items) + " items";
    if (report.hr_d) line += ", HR^D " + Json(report.hr_d->rate()).dump();
    if (report.hr_g) line += ", HR^G " + Json(report.hr_g->rate()).dump();
    log.summary(line);
    return finish(log, "bench", failures, {{"model", model_name}, {"items", report.n_items}});
  });
}

// ---------------------------------------------------------------------------
// prefs: hii.NAME.jsonl -> prefs.jsonl (+ rollout trace sidecar)

inline int cmd_prefs(const PipelineConfig& cfg, const fs::path& hii_path, const fs::path& out_path,
                     const std::optional<std::string>& model_override, EventLog& log) {
  return guarded(log, "prefs", [&] {
    const auto hiis = read_records<HiiRecord>(hii_path);
    std::vector<PreferencePair> pairs;
    std::vector<Json> traces;
    int failures = 0;
    if (!hiis.empty()) {
      std::map<std::string, std::unique_ptr<protocol::VisionLanguageModel>> models;
      for (const auto& h : hiis) {
        const std::string name = model_override.value_or(h.target_model);
        if (!models.contains(name)) models.emplace(name, make_vlm(cfg, name));
      }
      const auto detector = make_detector(cfg);
      const auto dict = load_dictionary(cfg);
      const auto access = image_access(cfg);
      const mask::DetectorContext ctx{*detector, dict, cfg.image_transport};
      auto outcomes = parallel_map(hiis, static_cast<std::size_t>(cfg.parallelism), [&](const HiiRecord& h) {
        auto& model = *models.at(model_override.value_or(h.target_model));
        auto built = prefs::build_pairs(h, model, ctx, dict, cfg.prefs, access);
        if (built.pairs.empty()) {
          log.info("no_pairs", {{"id", h.masked_image.masked_image_id},
                                {"message", h.masked_image.masked_image_id + ": rollouts produced no preference pair"}});
        }
        return built;
      });
      auto results = gather(hiis, outcomes, log, "prefs",
                            [](const HiiRecord& h) { return h.masked_image.masked_image_id; }, failures);
      for (auto& r : results) {
        std::ranges::move(r.pairs, std::back_inserter(pairs));
        for (const auto& s : r.steps) traces.push_back(prefs::trace_json(s));
      }
      prefs::sort_pairs(pairs);
      if (cfg.prefs.dedup) prefs::dedup_pairs(pairs);
    }
    write_jsonl(out_path, pairs);
    std::string trace_text;
    for (const auto& t : traces) trace_text += t.dump() + "\n";
    write_text_file(sidecar_path(out_path, "trace"), trace_text);
    log.summary("prefs: " + std::to_string(hiis.size()) + " HIIs, " + std::to_string(pairs.size()) +
                " pairs, " + std::to_string(failures) + " failed");
    return finish(log, "prefs", failures, {{"hiis", hiis.size()}, {"pairs", pairs.size()}});
  });
}

// ---------------------------------------------------------------------------
// stats: outcomes JSONL -> co-occurrence JSON (+ optional CSV)

inline int cmd_stats(const fs::path& outcomes_path, int top_k, const fs::path& out_path,
                     const std::optional<fs::path>& csv_path, EventLog& log) {
  return guarded(log, "stats", [&] {
    if (top_k < 1) throw ConfigError("top_k must be >= 1");
    const auto outcomes = read_records<bench::ItemOutcome>(outcomes_path);
    const auto table = bench::co_occurrence_stats(outcomes, top_k);
    Json j;
    j["top_k"] = top_k;
    j["n_items"] = outcomes.size();
    j["co_occurrence"] = bench::co_occurrence_json(table);
    write_json_file(out_path, j);
    if (csv_path) write_text_file(*csv_path, bench::co_occurrence_csv(table));
    return finish(log, "stats", 0, {{"items", outcomes.size()}});
  });
}

// ---------------------------------------------------------------------------
// loss: LossSample JSONL -> loss report JSON

inline Json loss_report(math::Objective objective, const std::vector<LossSample>& batch, double beta,
                        double fd_step = 1e-6) {
  const auto result = math::compute_loss(objective, batch, beta);
  Json j = math::to_json(result, objective, beta);
  j["grad_check"] = math::to_json(math::check_gradients(objective, batch, beta, fd_step));
  return j;
}

inline int cmd_loss(const fs::path& batch_path, math::Objective objective, double beta,
                    const std::optional<fs::path>& out_path, std::ostream& stdout_stream, EventLog& log) {
  return guarded(log, "loss", [&] {
    const auto batch = read_records<LossSample>(batch_path);
    const Json report = loss_report(objective, batch, beta);
    if (out_path) {
      write_json_file(*out_path, report);
    } else {
      stdout_stream << report.dump(2) << '\n';
    }
    return finish(log, "loss", 0, {{"objective", std::string(math::to_string(objective))}, {"n", batch.size()}});
  });
}

}  // namespace hiiforge::pipeline
