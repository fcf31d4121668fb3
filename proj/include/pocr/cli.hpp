#pragma once

// The `ocr` command line. run() is the whole program minus process exit so
// tests can drive it in-process.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error. Diagnostics go to
// `err` prefixed with "error:"; training progress also goes to `err` so that
// `out` stays machine-readable.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pocr/codec.hpp"
#include "pocr/error.hpp"
#include "pocr/harness.hpp"
#include "pocr/image.hpp"
#include "pocr/mlp.hpp"
#include "pocr/segment.hpp"

namespace pocr::cli {

namespace detail {

struct ThresholdFlags {
  std::string method = "otsu";
  int window = 15;
  int offset = 10;

  void add_to(CLI::App* app) {
    app->add_option("--method", method, "Binarization: otsu or local-mean")
        ->check(CLI::IsMember({"otsu", "local-mean"}));
    app->add_option("--window", window, "local-mean window (odd, >= 3)")
        ->check(CLI::Validator(
            [](std::string& s) -> std::string {
              int v = 0;
              try {
                v = std::stoi(s);
              } catch (...) {
                return "window must be an integer";
              }
              return v >= 3 && v % 2 == 1 ? "" : "window must be odd and >= 3";
            },
            "ODD>=3"));
    app->add_option("--offset", offset, "local-mean offset subtracted from the window mean");
  }

  ThresholdMethod get() const {
    return method == "otsu" ? ThresholdMethod::otsu() : ThresholdMethod::local_mean(window, offset);
  }
};

inline Charset charset_from_flag(const std::string& chars) {
  return chars.empty() ? default_charset() : Charset::from_ascii(chars);
}

inline void write_or_print(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_file(path, text);
  }
}

// "\n" in a shell argument becomes a line break.
inline std::string unescape_newlines(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size() && s[i + 1] == 'n') {
      out += '\n';
      ++i;
    } else {
      out += s[i];
    }
  }
  return out;
}

}  // namespace detail

inline int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Printed-character OCR with a sigmoid multilayer perceptron", "ocr"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  // binarize
  auto* binarize_cmd = app.add_subcommand("binarize", "Threshold a grayscale PGM into a 0/255 PGM");
  std::string bin_image, bin_out;
  bool bin_p5 = false;
  detail::ThresholdFlags bin_thr;
  binarize_cmd->add_option("--image", bin_image, "Input PGM")->required();
  binarize_cmd->add_option("--out", bin_out, "Output PGM")->required();
  bin_thr.add_to(binarize_cmd);
  binarize_cmd->add_flag("--p5", bin_p5, "Write binary P5 instead of text P2");

  // segment
  auto* segment_cmd = app.add_subcommand("segment", "Print character boxes as TSV");
  std::string seg_image;
  detail::ThresholdFlags seg_thr;
  SegmentParams seg_params;
  segment_cmd->add_option("--image", seg_image, "Input PGM")->required();
  seg_thr.add_to(segment_cmd);
  segment_cmd->add_option("--min-ink-rows", seg_params.min_ink_rows, "Ink pixels for a row to count as inked")
      ->check(CLI::PositiveNumber);
  segment_cmd->add_option("--min-ink-cols", seg_params.min_ink_cols, "Ink pixels for a column to count as inked")
      ->check(CLI::PositiveNumber);
  segment_cmd->add_option("--min-gap-cols", seg_params.min_gap_cols, "Blank columns that separate characters")
      ->check(CLI::PositiveNumber);

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Write synthetic glyph PGMs and a manifest");
  std::string synth_dir, synth_chars, synth_page_text, synth_page_out;
  std::vector<std::uint32_t> synth_variants{0, 1, 2, 3};
  int synth_thickness = 1;
  std::uint32_t synth_page_variant = 0;
  std::size_t synth_scale = 1;
  synth_cmd->add_option("--out-dir", synth_dir, "Output directory")->required();
  synth_cmd->add_option("--variants", synth_variants, "Style variant ids")->delimiter(',');
  synth_cmd->add_option("--thickness", synth_thickness, "Stroke thickness")->check(CLI::Range(1, 4));
  synth_cmd->add_option("--chars", synth_chars, "Characters to render (empty: the 90-character default set)");
  synth_cmd->add_option("--page-text", synth_page_text, "Also render a page of this text ('\\n' breaks lines)");
  synth_cmd->add_option("--page-out", synth_page_out, "Page PGM path (default: <out-dir>/page.pgm)");
  synth_cmd->add_option("--page-variant", synth_page_variant, "Style variant of the page glyphs");
  synth_cmd->add_option("--scale", synth_scale, "Integer upscaling of page glyphs")->check(CLI::Range(1, 8));

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a network on a manifest of glyph images");
  std::string train_manifest, train_model, train_grid = "30x20";
  std::size_t train_hidden = 256;
  std::size_t train_log_every = 1;
  TrainConfig train_cfg;
  train_cmd->add_option("--manifest", train_manifest, "Manifest TSV")->required();
  train_cmd->add_option("--model", train_model, "Output model file")->required();
  train_cmd->add_option("--hidden", train_hidden, "Hidden layer width")->check(CLI::PositiveNumber);
  train_cmd->add_option("--epochs", train_cfg.max_epochs, "Maximum epochs")->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", train_cfg.learning_rate, "Learning rate")->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", train_cfg.seed, "Weight initialization seed");
  train_cmd->add_option("--mse-tol", train_cfg.mse_tolerance, "Stop when epoch MSE <= this")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--grad-tol", train_cfg.grad_tolerance, "Stop when max |gradient| <= this")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--grid", train_grid, "Feature grid")->check(CLI::IsMember({"30x20", "15x12"}));
  train_cmd->add_option("--log-every", train_log_every, "Log MSE every N epochs")->check(CLI::PositiveNumber);

  // recognize
  auto* recognize_cmd = app.add_subcommand("recognize", "Recognize the text on a page image");
  std::string rec_model, rec_image, rec_chars;
  bool rec_scores = false;
  detail::ThresholdFlags rec_thr;
  SegmentParams rec_params;
  recognize_cmd->add_option("--model", rec_model, "Model file")->required();
  recognize_cmd->add_option("--image", rec_image, "Page PGM")->required();
  recognize_cmd->add_option("--chars", rec_chars, "Output charset (empty: the 90-character default set)");
  rec_thr.add_to(recognize_cmd);
  recognize_cmd->add_option("--min-gap-cols", rec_params.min_gap_cols, "Blank columns that separate characters")
      ->check(CLI::PositiveNumber);
  recognize_cmd->add_flag("--scores", rec_scores, "Print per-character matching scores to stderr");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Error report (CSV) of a model on a manifest");
  std::string eval_model, eval_manifest, eval_chars, eval_out;
  eval_cmd->add_option("--model", eval_model, "Model file")->required();
  eval_cmd->add_option("--manifest", eval_manifest, "Manifest TSV")->required();
  eval_cmd->add_option("--chars", eval_chars, "Decoding charset (empty: the 90-character default set)");
  eval_cmd->add_option("--out", eval_out, "CSV path (default: stdout)");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Epoch x hidden-width error table on synthetic glyphs");
  SweepSpec sweep_spec;
  std::string sweep_grid = "30x20", sweep_chars, sweep_out;
  std::vector<std::uint32_t> sweep_test_ids{3};
  int sweep_test_thickness = 2;
  sweep_cmd->add_option("--epochs-list", sweep_spec.epochs_list, "Epoch settings")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--hidden-list", sweep_spec.hidden_list, "Hidden width settings")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--lr", sweep_spec.base.learning_rate, "Learning rate")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--seed", sweep_spec.base.seed, "Base seed");
  sweep_cmd->add_option("--mse-tol", sweep_spec.base.mse_tolerance, "MSE stopping tolerance")
      ->check(CLI::NonNegativeNumber);
  sweep_cmd->add_option("--grad-tol", sweep_spec.base.grad_tolerance, "Gradient stopping tolerance")
      ->check(CLI::NonNegativeNumber);
  sweep_cmd->add_option("--grid", sweep_grid, "Feature grid")->check(CLI::IsMember({"30x20", "15x12"}));
  sweep_cmd->add_option("--train-variants", sweep_spec.train_variants, "Training variant ids")->delimiter(',');
  sweep_cmd->add_option("--test-variants", sweep_test_ids, "Held-out variant ids")->delimiter(',');
  sweep_cmd->add_option("--test-thickness", sweep_test_thickness,
                        "Thickness of the perturbed training-variant test copies (1 disables them)")
      ->check(CLI::Range(1, 4));
  sweep_cmd->add_option("--chars", sweep_chars, "Charset (empty: the 90-character default set)");
  sweep_cmd->add_option("--jobs", sweep_spec.jobs, "Cells trained in parallel")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--out", sweep_out, "CSV path (default: stdout)");

  // gradcheck
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference check of backpropagation");
  std::size_t gc_cases = 100;
  std::uint64_t gc_seed = 42;
  double gc_step = 1e-5;
  double gc_tol = 1e-6;
  gradcheck_cmd->add_option("--cases", gc_cases, "Random topologies to check")->check(CLI::PositiveNumber);
  gradcheck_cmd->add_option("--seed", gc_seed, "Seed");
  gradcheck_cmd->add_option("--step", gc_step, "Central-difference step")->check(CLI::PositiveNumber);
  gradcheck_cmd->add_option("--tol", gc_tol, "Maximum allowed relative deviation")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> args(argv.size() > 1 ? argv.begin() + 1 : argv.end(), argv.end());
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 1;
  }

  try {
    if (binarize_cmd->parsed()) {
      const BinRaster bin = binarize(load_pgm_file(bin_image), bin_thr.get());
      write_file(bin_out, save_pgm(to_gray(bin), bin_p5));
    } else if (segment_cmd->parsed()) {
      const BinRaster bin = binarize(load_pgm_file(seg_image), seg_thr.get());
      out << "line\tchar\ttop\tbottom\tleft\tright\n";
      const auto bands = detect_lines(bin, seg_params);
      for (std::size_t li = 0; li < bands.size(); ++li) {
        const auto boxes = detect_chars(bin, bands[li], seg_params);
        for (std::size_t ci = 0; ci < boxes.size(); ++ci) {
          const auto& b = boxes[ci];
          out << li << '\t' << ci << '\t' << b.top << '\t' << b.bottom << '\t' << b.left << '\t' << b.right << '\n';
        }
      }
    } else if (synth_cmd->parsed()) {
      namespace fs = std::filesystem;
      const Charset cs = detail::charset_from_flag(synth_chars);
      std::vector<ManifestEntry> entries;
      for (auto v : synth_variants) {
        const VariantSpec spec{v, synth_thickness};
        fs::create_directories(fs::path(synth_dir) / spec.tag());
        for (auto cp : cs.codepoints()) {
          char name[16];
          std::snprintf(name, sizeof name, "%04X.pgm", cp);
          const std::string rel = spec.tag() + "/" + name;
          const GlyphMatrix g = render_synthetic_glyph(cp, v, synth_thickness);
          const GrayRaster page = render_page({{g}}, PageLayout{2, 0, 0, 1});
          write_file((fs::path(synth_dir) / rel).string(), save_pgm(page, false));
          entries.push_back({rel, cp});
        }
      }
      write_file((fs::path(synth_dir) / "manifest.tsv").string(), format_manifest(entries));
      if (!synth_page_text.empty()) {
        const std::string path =
            synth_page_out.empty() ? (fs::path(synth_dir) / "page.pgm").string() : synth_page_out;
        PageLayout layout;
        layout.scale = synth_scale;
        write_file(path, save_pgm(render_text_page(detail::unescape_newlines(synth_page_text), synth_page_variant,
                                                   synth_thickness, layout),
                                  false));
      }
      err << "wrote " << entries.size() << " glyphs to " << synth_dir << "\n";
    } else if (train_cmd->parsed()) {
      const FeatureGrid grid = parse_grid(train_grid);
      const auto samples = load_manifest_samples(train_manifest, grid);
      if (samples.empty()) throw Error("manifest lists no images");
      const auto data = to_examples(samples);
      Mlp init = new_network({feature_count(grid), train_hidden, kCodeBits}, train_cfg.seed);
      auto result = train(std::move(init), data, train_cfg, [&](std::size_t epoch, const Metrics& m, const Mlp&) {
        if (epoch % train_log_every == 0) {
          char line[96];
          std::snprintf(line, sizeof line, "epoch %zu mse %.6g mae %.6g\n", epoch, m.mse, m.mae);
          err << line;
        }
      });
      write_file(train_model, save_model(result.net));
      err << "stopped: " << to_string(result.stop_reason) << " after " << result.history.size() << " epochs\n";
    } else if (recognize_cmd->parsed()) {
      const Mlp net = load_model(read_file(rec_model));
      const BinRaster bin = binarize(load_pgm_file(rec_image), rec_thr.get());
      const PageText page = recognize_page(bin, net, detail::charset_from_flag(rec_chars), rec_params);
      out << page.text();
      if (rec_scores) {
        for (std::size_t li = 0; li < page.lines.size(); ++li) {
          for (std::size_t ci = 0; ci < page.lines[li].chars.size(); ++ci) {
            const auto& c = page.lines[li].chars[ci];
            char line[96];
            std::snprintf(line, sizeof line, "%zu\t%zu\t%04X\t%.4f\n", li, ci, c.codepoint, c.score);
            err << line;
          }
        }
      }
    } else if (eval_cmd->parsed()) {
      const Mlp net = load_model(read_file(eval_model));
      const auto samples = load_manifest_samples(eval_manifest, grid_for_inputs(net.input_size()));
      if (samples.empty()) throw Error("manifest lists no images");
      const auto report = evaluate(net, samples, detail::charset_from_flag(eval_chars));
      detail::write_or_print(eval_out, report.to_csv(), out);
    } else if (sweep_cmd->parsed()) {
      sweep_spec.grid = parse_grid(sweep_grid);
      sweep_spec.test_variants.clear();
      for (auto id : sweep_test_ids) sweep_spec.test_variants.push_back({id, 1});
      if (sweep_test_thickness != 1) {
        for (auto id : sweep_spec.train_variants) sweep_spec.test_variants.push_back({id, sweep_test_thickness});
      }
      const auto report = sweep(detail::charset_from_flag(sweep_chars), sweep_spec);
      detail::write_or_print(sweep_out, report.to_csv(), out);
    } else if (gradcheck_cmd->parsed()) {
      const auto res = gradcheck_suite(gc_cases, gc_seed, gc_step, gc_tol);
      char buf[160];
      std::snprintf(buf, sizeof buf, "cases %zu\nmax_deviation %.3e\nnegative_control %.3e\nnegatives_flagged %zu\n",
                    res.cases, res.max_deviation, res.negative_deviation, res.negatives_flagged);
      out << buf;
      if (res.max_deviation > gc_tol) throw Error("analytic gradient deviates beyond tolerance");
      if (res.negatives_flagged != res.cases) throw Error("negative control went undetected");
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace pocr::cli
