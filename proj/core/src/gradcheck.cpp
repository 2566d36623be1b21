#include "ilpc/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "ilpc/dsp.hpp"
#include "ilpc/layers.hpp"
#include "ilpc/lpmdn.hpp"
#include "ilpc/optim.hpp"
#include "ilpc/rng.hpp"
#include "ilpc/trainer.hpp"

namespace ilpc {

namespace {

// Worst relative error between the analytic gradient and a central finite
// difference of the scalar node `out`, over every element of every param.
double check_graph(Graph& g, int out, const std::vector<Param*>& params, double h,
                   bool corrupt) {
  for (Param* p : params) p->grad.fill(0.0);
  g.forward();
  g.backward(out);
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Param* p : params) analytic.push_back(p->grad);
  if (corrupt && !analytic.empty() && analytic[0].size() > 0) analytic[0][0] += 0.05;

  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Param& p = *params[pi];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double orig = p.value[i];
      p.value[i] = orig + h;
      g.forward();
      const double fp = g.value(out)[0];
      p.value[i] = orig - h;
      g.forward();
      const double fm = g.value(out)[0];
      p.value[i] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double a = analytic[pi][i];
      const double denom = std::max({std::abs(a), std::abs(fd), 1e-6});
      worst = std::max(worst, std::abs(a - fd) / denom);
    }
  }
  g.forward();  // restore values for any later use
  return worst;
}

Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng, double scale = 0.5) {
  Tensor t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
  return t;
}

double trial_fc(Rng& rng, double h, bool corrupt) {
  FcLayer layer = FcLayer::create("fc", 6, 5, rng);
  Graph g;
  int x = g.constant(random_tensor(4, 6, rng));
  int out = g.mean_all(g.tanh_(fc_forward(g, layer, x)));
  std::vector<Param*> params;
  layer.collect(params);
  return check_graph(g, out, params, h, corrupt);
}

double trial_conv(Rng& rng, double h, bool corrupt) {
  Conv1dLayer layer = Conv1dLayer::create("conv", 4, 4, rng);
  Graph g;
  int x = g.constant(random_tensor(2 * 5, 4, rng));
  int out = g.mean_all(g.tanh_(conv1x3_forward(g, layer, x, 2, 5)));
  std::vector<Param*> params;
  layer.collect(params);
  return check_graph(g, out, params, h, corrupt);
}

double trial_tconv(Rng& rng, double h, bool corrupt) {
  TransposedConvLayer layer = TransposedConvLayer::create("up", 4, 3, 4, rng);
  Graph g;
  int x = g.constant(random_tensor(3, 4, rng));
  int out = g.mean_all(g.tanh_(transposed_conv_forward(g, layer, x)));
  std::vector<Param*> params;
  layer.collect(params);
  return check_graph(g, out, params, h, corrupt);
}

double trial_gru(Rng& rng, double h, bool corrupt) {
  const std::size_t batch = 3, steps = 3, in = 5, hidden = 4;
  GruLayer layer = GruLayer::create("gru", in, hidden, rng);
  Graph g;
  int x = g.constant(random_tensor(steps * batch, in, rng));
  GruNodes nodes = gru_bind(g, layer);
  int xproj = gru_xproj(g, layer, x);
  int hstate = g.constant(Tensor(batch, hidden));
  for (std::size_t t = 0; t < steps; ++t)
    hstate = gru_step(g, nodes, hstate,
                      g.slice_rows(xproj, t * batch, batch));
  int out = g.mean_all(hstate);
  std::vector<Param*> params;
  layer.collect(params);
  return check_graph(g, out, params, h, corrupt);
}

double trial_weight_norm(Rng& rng, double h, bool corrupt) {
  NormParam p = NormParam::create("wn", random_tensor(3, 4, rng, 1.0));
  Graph g;
  int w = weight_norm(g, p);
  int x = g.constant(random_tensor(4, 2, rng));
  int out = g.mean_all(g.tanh_(g.matmul(w, x)));
  return check_graph(g, out, {&p.direction, &p.gain}, h, corrupt);
}

double trial_mog_nll(Rng& rng, double h, bool corrupt) {
  double worst = 0.0;
  for (int mixtures : {1, 2}) {
    const std::size_t rows = 5;
    const std::size_t cols = mixtures == 1 ? 2 : 3 * mixtures;
    Param heads("heads", random_tensor(rows, cols, rng));
    Graph g;
    int hnode = g.param(heads);
    int pred = g.constant(random_tensor(rows, 1, rng, 0.3));
    int target = g.constant(random_tensor(rows, 1, rng, 0.3));
    MogNodes mog = mog_nll_graph(g, hnode, pred, target, mixtures);
    int out = g.mean_all(mog.nll);
    worst = std::max(worst, check_graph(g, out, {&heads}, h, corrupt));
  }
  return worst;
}

double trial_power_loss(Rng& rng, double h, bool corrupt) {
  const std::size_t batch = 1, fft = 64, hop = 16;
  const std::size_t samples = fft + 2 * hop;  // three frames
  Param xhat("xhat", random_tensor(batch * samples, 1, rng, 0.3));
  std::vector<double> clean(samples);
  for (double& v : clean) v = 0.3 * rng.normal();
  Tensor ref = stft(clean, fft, hop);
  Graph g;
  int xnode = g.param(xhat);
  int refnode = g.constant(std::move(ref));
  int out = power_loss_graph(g, xnode, refnode, batch, samples, fft, hop);
  return check_graph(g, out, {&xhat}, h, corrupt);
}

}  // namespace

std::vector<GradCheckEntry> run_gradient_checks(const GradCheckOptions& opt) {
  struct Component {
    const char* name;
    double (*trial)(Rng&, double, bool);
  };
  const Component components[] = {
      {"fc", trial_fc},
      {"conv1x3", trial_conv},
      {"transposed_conv", trial_tconv},
      {"gru_3step", trial_gru},
      {"weight_norm", trial_weight_norm},
      {"mog_nll", trial_mog_nll},
      {"power_loss", trial_power_loss},
  };
  std::vector<GradCheckEntry> report;
  for (const Component& c : components) {
    GradCheckEntry entry;
    entry.component = c.name;
    for (std::size_t t = 0; t < opt.trials; ++t) {
      Rng rng(opt.seed + 7919 * t);
      entry.max_rel_err =
          std::max(entry.max_rel_err, c.trial(rng, opt.step, opt.corrupt));
    }
    entry.pass = entry.max_rel_err < opt.tolerance;
    report.push_back(std::move(entry));
  }
  return report;
}

}  // namespace ilpc
