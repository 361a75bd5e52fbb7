#include <chrono>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "mim/checkpoint.hpp"
#include "mim/error.hpp"
#include "mim/harness/metrics.hpp"
#include "mim/harness/model.hpp"
#include "mim/harness/train.hpp"
#include "mim/mim_encoder.hpp"
#include "mim/ops.hpp"
#include "mim/verify.hpp"

namespace mim::verify {
namespace {

using ad::Var;

Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c, double sd = 1.0) {
  Tensor t({r, c});
  for (auto& v : t.values()) v = rng.normal(0.0, sd);
  return t;
}

Frame random_frame(Rng& rng, std::size_t h, std::size_t w) {
  Frame f(3, h, w);
  for (auto& v : f.data) v = rng.uniform();
  return f;
}

template <class F>
SuiteResult timed(const std::string& name, F&& body) {
  SuiteResult r;
  r.name = name;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    std::ostringstream detail;
    r.passed = body(detail);
    r.detail = detail.str();
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

void set_leaf(const Var& v, const Tensor& t) {
  Var h = v;
  h.leaf_value() = t;
}

// Tiny end-to-end configuration: 16×16 frames, 8×8 patches (L = 4).
harness::RunConfig tiny_config() {
  harness::RunConfig c;
  c.frame_size = 16;
  c.canvas_size = 16;
  c.patch = 8;
  c.dim = 8;
  c.state = 4;
  c.depth = 2;
  c.window = 2;
  c.stride = 1;
  c.head_hidden = 8;
  c.crop_size = 16;
  c.light_patch = 8;
  c.light_width = 8;
  c.light_state = 4;
  c.embed_dim = 8;
  c.memory_crops = 2;
  return c;
}

harness::SequenceDataset tiny_sequence(Rng& rng) {
  harness::SequenceDataset s;
  for (int t = 0; t < 4; ++t) {
    s.frames.push_back(random_frame(rng, 16, 16));
    s.gt.push_back({3.0 + t, 4.0, 6.0, 5.0});
  }
  return s;
}

}  // namespace

SuiteResult suite_discretization(std::size_t systems, std::uint64_t seed) {
  return timed("discretization", [&](std::ostream& detail) {
    Rng rng(seed);
    double worst = 0.0;
    for (std::size_t i = 0; i < systems; ++i) {
      const auto sys = random_system(rng, 1 + rng.index(8), 1 + rng.index(3), 2.0);
      const auto got = ssm::discretize(sys);
      const auto want = taylor_discretize(sys);
      worst = std::max({worst, max_abs_diff(got.a_bar, want.a_bar), max_abs_diff(got.b_bar, want.b_bar)});
    }
    detail << systems << " systems, max deviation " << worst;
    return worst < 1e-10;
  });
}

SuiteResult suite_scan_equivalence(std::size_t systems, std::uint64_t seed) {
  return timed("scan_equivalence", [&](std::ostream& detail) {
    Rng rng(seed);
    double worst = 0.0;
    for (std::size_t i = 0; i < systems; ++i) {
      const std::size_t n = 1 + rng.index(8), l = 1 + rng.index(3);
      const std::size_t m = i % 10 == 0 ? 256 : 1 + rng.index(256);
      const auto d = ssm::discretize(random_stable_system(rng, n, l));
      const Tensor x = random_tensor(rng, m, l);
      const Tensor rec = ssm::recurrent_scan(d, x, Tensor({n}));
      const Tensor conv = ssm::conv_scan(ssm::conv_kernel(d, m), d, x);
      worst = std::max(worst, max_abs_diff(rec, conv));
    }
    detail << systems << " systems, max deviation " << worst;
    return worst < 1e-9;
  });
}

SuiteResult suite_selective_lti(std::size_t cases, std::uint64_t seed) {
  return timed("selective_lti", [&](std::ostream& detail) {
    Rng rng(seed);
    double worst = 0.0;
    for (std::size_t i = 0; i < cases; ++i) {
      const std::size_t D = 1 + rng.index(4), N = 1 + rng.index(8), m = 1 + rng.index(64);
      auto p = ssm::SelectiveParams::init(D, N, rng);
      set_leaf(p.delta_proj, Tensor({D, D}));
      set_leaf(p.b_proj, Tensor({D, N}));
      set_leaf(p.c_proj, Tensor({D, N}));
      set_leaf(p.delta_bias, random_tensor(rng, 1, D));
      set_leaf(p.b_bias, random_tensor(rng, 1, N));
      set_leaf(p.c_bias, random_tensor(rng, 1, N));
      set_leaf(p.a_log, random_tensor(rng, D, N, 0.5));
      set_leaf(p.skip, random_tensor(rng, 1, D));
      const Tensor x = random_tensor(rng, m, D);
      const auto dir = i % 2 ? ssm::Direction::kReverse : ssm::Direction::kForward;
      const Tensor y = ssm::selective_scan(p, Var::constant(x), dir).value();
      for (std::size_t d = 0; d < D; ++d) {
        ssm::ContinuousSSM c;
        c.a = Tensor({N, N});
        c.b = Tensor({N, 1});
        c.c = Tensor({1, N});
        for (std::size_t n = 0; n < N; ++n) {
          c.a.at(n, n) = -std::exp(p.a_log.value().at(d, n));
          c.b.at(n, 0) = p.b_bias.value()[n];
          c.c.at(0, n) = p.c_bias.value()[n];
        }
        c.d = Tensor::scalar(p.skip.value()[d]);
        c.delta = ad::softplus_value(p.delta_bias.value()[d]);
        Tensor col({m, 1});
        for (std::size_t k = 0; k < m; ++k)
          col[k] = x.at(dir == ssm::Direction::kForward ? k : m - 1 - k, d);
        const Tensor ref = ssm::recurrent_scan(ssm::discretize(c), col, Tensor({N}));
        for (std::size_t k = 0; k < m; ++k) {
          const std::size_t row = dir == ssm::Direction::kForward ? k : m - 1 - k;
          worst = std::max(worst, std::abs(ref[k] - y.at(row, d)));
        }
      }
    }
    detail << cases << " cases, max deviation " << worst;
    return worst < 1e-8;
  });
}

SuiteResult suite_retrieval(std::size_t trials, std::uint64_t seed) {
  return timed("retrieval", [&](std::ostream& detail) {
    Rng rng(seed);
    std::size_t mismatches = 0, ties = 0, oversized = 0;
    for (std::size_t t = 0; t < trials; ++t) {
      const std::size_t dim = 1 + rng.index(8);
      const bool integer = t % 2 == 0;
      auto draw = [&] {
        std::vector<double> v(dim);
        do {
          for (auto& x : v) x = integer ? static_cast<double>(rng.index(5)) - 2.0 : rng.normal();
        } while (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; }));
        return v;
      };
      rat::MemoryCorpus corpus(1.0, dim, 256);
      const std::size_t n = rng.index(31);
      for (std::size_t i = 0; i < n; ++i) corpus.maybe_insert(draw());
      std::vector<std::vector<double>> entries;
      for (std::size_t i = 0; i < corpus.size(); ++i)
        entries.emplace_back(corpus.entry(i).begin(), corpus.entry(i).end());
      const auto q = draw();
      const std::size_t k = 1 + rng.index(12);
      const auto got = corpus.retrieve_top_k(q, k);
      const auto want = brute_force_top_k(entries, q, k);
      if (got != want) ++mismatches;
      if (k > corpus.size()) ++oversized;
      for (std::size_t i = 1; i < want.size(); ++i)
        if (want[i].similarity == want[i - 1].similarity) {
          ++ties;
          break;
        }
    }
    detail << trials << " trials, " << mismatches << " mismatches, " << ties
           << " with ties, " << oversized << " with K > |C|";
    return mismatches == 0 && ties > 0 && oversized > 0;
  });
}

SuiteResult suite_corpus_threshold(std::size_t streams, std::uint64_t seed) {
  return timed("corpus_threshold", [&](std::ostream& detail) {
    Rng rng(seed);
    std::size_t wrong = 0, admitted = 0, rejected = 0, boundary = 0;
    const std::size_t capacity = 12;
    for (std::size_t s = 0; s < streams; ++s) {
      const std::size_t dim = 2 + rng.index(5);
      rat::MemoryCorpus corpus(0.8, dim, capacity);
      std::deque<std::vector<long long>> mirror;
      std::vector<std::vector<long long>> stream;
      // Start each stream with a pair at cosine exactly 0.8: (4,3,0..) then (1,0,0..).
      std::vector<long long> a(dim, 0), b(dim, 0);
      a[0] = 4, a[1] = 3, b[0] = 1;
      stream.push_back(a);
      stream.push_back(b);
      const std::size_t len = 5 + rng.index(36);
      for (std::size_t i = 0; i < len; ++i) {
        std::vector<long long> v(dim);
        do {
          for (auto& x : v) x = static_cast<long long>(rng.index(7)) - 3;
        } while (std::all_of(v.begin(), v.end(), [](long long x) { return x == 0; }));
        stream.push_back(v);
      }
      for (const auto& v : stream) {
        bool expect = true;
        for (const auto& e : mirror) {
          if (!integer_cosine_below(v, e, 4, 5)) expect = false;
          // dot·5 == 4·|v||e| exactly.
          __int128 dot = 0, nv = 0, ne = 0;
          for (std::size_t i = 0; i < dim; ++i) dot += v[i] * e[i], nv += v[i] * v[i], ne += e[i] * e[i];
          if (dot > 0 && dot * dot * 25 == 16 * nv * ne) ++boundary;
        }
        const std::vector<double> vd(v.begin(), v.end());
        const bool got = corpus.maybe_insert(vd);
        if (got != expect) ++wrong;
        if (got) {
          ++admitted;
          if (mirror.size() == capacity) mirror.pop_front();
          mirror.push_back(v);
        } else {
          ++rejected;
        }
      }
    }
    detail << streams << " streams, " << admitted << " admitted, " << rejected << " rejected, "
           << boundary << " exact-boundary comparisons, " << wrong << " disagreements";
    return wrong == 0 && boundary >= streams;
  });
}

SuiteResult suite_gradients(std::uint64_t seed) {
  return timed("gradients", [&](std::ostream& detail) {
    Rng rng(seed);
    bool ok = true;
    auto report = [&](const std::string& name, const GradCheck& g) {
      detail << name << " " << g.max_error << " (" << g.probes << " probes); ";
      ok = ok && g.max_error < 1e-4 && g.probes >= 20;
    };

    {
      const std::size_t D = 3, N = 4, m = 12;
      const auto p = ssm::SelectiveParams::init(D, N, rng);
      const Var x = Var::parameter(random_tensor(rng, m, D));
      const Var w = Var::constant(random_tensor(rng, m, D));
      nn::ParamList params;
      p.collect("scan", params);
      params.emplace_back("x", x);
      report("scan", check_gradients(
                         [&] {
                           return ad::sum(ad::mul(ssm::bidirectional_scan(p, x), w));
                         },
                         params, 40, rng));
    }
    {
      enc::EncoderConfig ec;
      ec.dim = 6;
      ec.state = 3;
      ec.depth = 1;
      for (auto inj : {enc::Injection::kQueryAttention, enc::Injection::kAdditive,
                       enc::Injection::kConcatenate, enc::Injection::kKeyValueAttention}) {
        ec.injection = inj;
        const auto block = enc::MiMBlock::init(0, ec, rng);
        const Var tokens = Var::parameter(random_tensor(rng, 5, 6));
        const Var query = Var::parameter(random_tensor(rng, 1, 6));
        const Var w = Var::constant(random_tensor(rng, 5, 6));
        nn::ParamList params{{"tokens", tokens}, {"query", query}};
        block.collect("block", params);
        std::erase_if(params, [](const auto& p) {
          return p.first.find("w_") == std::string::npos && p.first != "tokens" &&
                 p.first != "query";
        });
        report("attention/" + std::to_string(static_cast<int>(inj)),
               check_gradients(
                   [&] {
                     return ad::sum(ad::mul(
                         enc::tracking_attention(block, tokens, query, inj).tokens, w));
                   },
                   params, 30, rng));
      }
    }
    {
      const Var x = Var::parameter(random_tensor(rng, 4, 7));
      const Var gain = Var::parameter(random_tensor(rng, 1, 7));
      const Var bias = Var::parameter(random_tensor(rng, 1, 7));
      const Var w = Var::constant(random_tensor(rng, 4, 7));
      report("layer_norm", check_gradients(
                               [&] { return ad::sum(ad::mul(ad::layer_norm(x, gain, bias), w)); },
                               {{"x", x}, {"gain", gain}, {"bias", bias}}, 30, rng));
    }
    {
      const tok::PatchGeometry g{32, 32, 8};
      const Var raw = Var::parameter(random_tensor(rng, g.count(), 5));
      const BBox gt{9.0, 6.0, 11.0, 13.0};
      report("head_loss", check_gradients([&] { return head::loss(raw, gt, g).total; },
                                          {{"raw", raw}}, 40, rng));
    }
    {
      const harness::RunConfig cfg = tiny_config();
      const auto model = harness::TrackingModel::init(cfg, seed);
      Rng data_rng(seed + 1);
      const harness::SequenceDataset seq = tiny_sequence(data_rng);
      const harness::PreparedSequence prepared{&seq, harness::make_template(model, seq.frames[0], seq.gt[0])};
      const auto params = model.params();
      report("end_to_end", check_gradients(
                               [&] {
                                 Rng sample_rng(seed + 2);
                                 return harness::sample_loss(model, prepared, 3, sample_rng).total;
                               },
                               params, 40, rng));
    }
    return ok;
  });
}

SuiteResult suite_fixed_point(std::uint64_t seed) {
  return timed("fixed_point", [&](std::ostream& detail) {
    Rng rng(seed);
    enc::EncoderConfig ec;
    ec.dim = 8;
    ec.state = 4;
    ec.depth = 3;
    const auto stack = enc::EncoderStack::init(ec, rng);
    const nn::Linear proj = nn::Linear::init(3 * 8 * 8, 8, rng);
    const auto zero_emb = tok::PositionEmbeddings{Var::constant(Tensor({4, 8})),
                                                  Var::constant(Tensor({4, 8}))};
    const Frame f = random_frame(rng, 16, 16);
    const tok::TokenGrid constant = tok::build_grid(f, {f, f, f}, 8, proj, zero_emb);
    bool ok = true;
    for (const auto& block : stack.blocks) {
      const tok::TokenGrid out = enc::time_serialization_scan(block, constant, 1.0);
      ok = ok && out.tokens.value() == constant.tokens.value();
    }
    detail << "constant grid fixed point " << (ok ? "exact" : "broken") << "; ";

    const auto emb = tok::PositionEmbeddings::init(4, 4, 8, rng);
    const tok::TokenGrid grid = tok::build_grid(random_frame(rng, 16, 16),
                                                {random_frame(rng, 16, 16), random_frame(rng, 16, 16),
                                                 random_frame(rng, 16, 16)},
                                                8, proj, emb);
    const Var templ = grid.frame(0);
    bool templ_ok = true;
    for (const auto& block : stack.blocks) {
      const tok::TokenGrid out = enc::time_serialization_scan(block, grid, 1.0);
      templ_ok = templ_ok && out.frame(0).value() == templ.value();
    }
    // The template slice after a full forward does not depend on attention or
    // the temporal scan.
    auto plain = stack;
    plain.config.temporal = plain.config.retrieval = false;
    const Var q = Var::constant(random_tensor(rng, 1, 8));
    const Tensor full_t = enc::forward(stack, grid, q).frame(0).value();
    const Tensor plain_t = enc::forward(plain, grid, std::nullopt).frame(0).value();
    templ_ok = templ_ok && full_t == plain_t;
    detail << "template slice " << (templ_ok ? "untouched" : "modified");
    return ok && templ_ok;
  });
}

SuiteResult suite_metrics() {
  return timed("metrics", [&](std::ostream& detail) {
    const HandTable t = five_frame_table();
    const auto r = harness::evaluate(t.traj, t.gt);
    bool ious = true;
    for (std::size_t i = 0; i < t.ious.size(); ++i) ious = ious && iou(t.traj[i], t.gt[i]) == t.ious[i];
    const bool ok = ious && r.precision == t.precision && r.success == t.success &&
                    r.success_auc == t.success_auc;
    detail << "success AUC " << r.success_auc << " (hand " << t.success_auc << "), curves "
           << (r.precision == t.precision && r.success == t.success ? "match" : "differ");
    return ok;
  });
}

SuiteResult suite_round_trip(const std::filesystem::path& scratch, std::uint64_t seed) {
  return timed("round_trip", [&](std::ostream& detail) {
    std::filesystem::create_directories(scratch);
    const auto model = harness::TrackingModel::init(tiny_config(), seed);
    const auto params = model.params();
    const auto ckpt = scratch / "roundtrip.ckpt";
    checkpoint::write(ckpt, checkpoint::snapshot(params));
    const auto other = harness::TrackingModel::init(tiny_config(), seed + 1);
    const auto other_params = other.params();
    checkpoint::restore(other_params, checkpoint::read(ckpt));
    bool ckpt_ok = checkpoint::snapshot(other_params) == checkpoint::snapshot(params);

    Rng rng(seed);
    rat::MemoryCorpus corpus(0.8, 16, 256);
    for (int i = 0; i < 40; ++i) {
      std::vector<double> e(16);
      for (auto& v : e) v = rng.normal();
      corpus.maybe_insert(e);
    }
    const auto mem = scratch / "roundtrip.mem";
    corpus.save(mem);
    const bool mem_ok = rat::MemoryCorpus::load(mem) == corpus;
    detail << params.size() << " arrays " << (ckpt_ok ? "bit-exact" : "differ") << ", "
           << corpus.size() << " memory entries " << (mem_ok ? "bit-exact" : "differ");
    return ckpt_ok && mem_ok;
  });
}

std::vector<SuiteResult> run_all(const std::filesystem::path& scratch) {
  return {suite_discretization(),   suite_scan_equivalence(), suite_selective_lti(),
          suite_retrieval(),        suite_corpus_threshold(), suite_gradients(),
          suite_fixed_point(),      suite_metrics(),          suite_round_trip(scratch)};
}

std::string summary_json(const std::vector<SuiteResult>& results) {
  nlohmann::json j;
  bool all = true;
  j["suites"] = nlohmann::json::array();
  for (const auto& r : results) {
    all = all && r.passed;
    j["suites"].push_back(
        {{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}, {"seconds", r.seconds}});
  }
  j["passed"] = all;
  return j.dump(2);
}

}  // namespace mim::verify
