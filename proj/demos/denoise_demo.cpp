// Minimal end-to-end example: simulate a noisy low-rank matrix, denoise it
// with the blind GSURE rule, and compare against the truth.

#include <iostream>

#include <svshrink/svshrink.hpp>

int main() {
  using namespace svshrink;

  const Index n = 100, p = 250, rank = 5;
  const auto signal = generate_signal(n, p, rank, /*seed=*/42);
  const auto sample = add_noise(signal.w, /*snr=*/2.0, NoiseFamily::Gaussian,
                                /*seed=*/43);

  const auto dec = decompose(sample.x);
  SelectionRule rule;
  rule.kind = SelectionRule::Kind::Gsure;
  const auto sel = grid_select(dec, rule, default_grid(dec.lambdas));
  const Vector d_hat = atn(dec.lambdas, sel.tau, sel.gamma);

  std::cout << "selected tau=" << sel.tau << " gamma=" << sel.gamma << "\n"
            << "estimated rank: " << estimated_rank(d_hat)
            << " (true " << rank << ")\n"
            << "relative MSE vs truth: "
            << relative_mse(reconstruct(dec, d_hat), signal.w) << "\n"
            << "relative MSE of the raw data: "
            << relative_mse(sample.x, signal.w) << "\n";
  return 0;
}
