#include "dfd/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "dfd/error.hpp"

namespace dfd::ad {

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapC = Eigen::Map<const Mat<T>>;
template <typename T>
using MapM = Eigen::Map<Mat<T>>;

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
Tensor<T> make_result(const char* op, Shape shape, AlignedVector<T> value, std::vector<NodePtr<T>> parents,
                      std::function<void(Node<T>&)> bw) {
  for (const T& v : value) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite output in op '") + op + "'");
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  node->is_leaf = false;
  node->order = next_order();
  node->requires_grad = std::any_of(parents.begin(), parents.end(), [](const NodePtr<T>& p) { return p->requires_grad; });
  if (node->requires_grad) {
    node->parents = std::move(parents);
    node->backward = std::move(bw);
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
bool wants(const NodePtr<T>& p) {
  return p->requires_grad;
}

// Leading element count when `suffix` is a trailing slice of `full`.
std::size_t broadcast_reps(const Shape& full, const Shape& suffix, const char* op) {
  if (suffix.size() > full.size() || !std::equal(suffix.rbegin(), suffix.rend(), full.rbegin())) {
    throw ArgumentError(std::string(op) + ": shape " + to_string(suffix) + " does not broadcast to " +
                        to_string(full));
  }
  return numel(full) / std::max<std::size_t>(1, numel(suffix));
}

void require_rank(const Shape& s, std::size_t rank, const char* op) {
  if (s.size() != rank) {
    throw ArgumentError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + to_string(s));
  }
}

template <typename T, typename F, typename D>
Tensor<T> unary(const char* op, const Tensor<T>& a, F f, D df) {
  const auto& av = a.node()->value;
  AlignedVector<T> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  return make_result<T>(op, a.shape(), std::move(out), {a.node()}, [df](Node<T>& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * df(pa.value[i], self.value[i]);
  });
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() < 1 || b.rank() != 2 || a.dim(-1) != b.dim(0)) {
    throw ArgumentError("matmul: incompatible shapes " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  const std::size_t k = b.dim(0), n = b.dim(1), rows = a.numel() / k;
  Shape shape = a.shape();
  shape.back() = n;
  AlignedVector<T> out(rows * n);
  MapM<T>(out.data(), rows, n).noalias() = MapC<T>(a.data().data(), rows, k) * MapC<T>(b.data().data(), k, n);
  return make_result<T>("matmul", std::move(shape), std::move(out), {a.node(), b.node()},
                        [rows, k, n](Node<T>& self) {
                          auto& pa = *self.parents[0];
                          auto& pb = *self.parents[1];
                          MapC<T> g(self.grad.data(), rows, n);
                          if (pa.requires_grad) {
                            MapM<T>(pa.grad.data(), rows, k).noalias() += g * MapC<T>(pb.value.data(), k, n).transpose();
                          }
                          if (pb.requires_grad) {
                            MapM<T>(pb.grad.data(), k, n).noalias() += MapC<T>(pa.value.data(), rows, k).transpose() * g;
                          }
                        });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  if (x.rank() < 1 || w.rank() != 2 || x.dim(-1) != w.dim(1)) {
    throw ArgumentError("linear: incompatible shapes " + to_string(x.shape()) + " x " + to_string(w.shape()));
  }
  const std::size_t in = w.dim(1), outd = w.dim(0), rows = x.numel() / in;
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != outd)) {
    throw ArgumentError("linear: bias shape " + to_string(bias.shape()) + " does not match output width");
  }
  Shape shape = x.shape();
  shape.back() = outd;
  AlignedVector<T> out(rows * outd);
  MapM<T> y(out.data(), rows, outd);
  y.noalias() = MapC<T>(x.data().data(), rows, in) * MapC<T>(w.data().data(), outd, in).transpose();
  if (has_bias) y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.data().data(), outd);
  std::vector<NodePtr<T>> parents{x.node(), w.node()};
  if (has_bias) parents.push_back(bias.node());
  return make_result<T>("linear", std::move(shape), std::move(out), std::move(parents),
                        [rows, in, outd](Node<T>& self) {
                          auto& px = *self.parents[0];
                          auto& pw = *self.parents[1];
                          MapC<T> g(self.grad.data(), rows, outd);
                          if (px.requires_grad) {
                            MapM<T>(px.grad.data(), rows, in).noalias() += g * MapC<T>(pw.value.data(), outd, in);
                          }
                          if (pw.requires_grad) {
                            MapM<T>(pw.grad.data(), outd, in).noalias() += g.transpose() * MapC<T>(px.value.data(), rows, in);
                          }
                          if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
                            Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(self.parents[2]->grad.data(), outd) +=
                                g.colwise().sum();
                          }
                        });
}

template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b) {
  require_rank(a.shape(), 3, "bmm");
  require_rank(b.shape(), 3, "bmm");
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2);
  const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
  const std::size_t bk = transpose_b ? b.dim(2) : b.dim(1);
  if (b.dim(0) != batch || bk != k) {
    throw ArgumentError("bmm: incompatible shapes " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  AlignedVector<T> out(batch * m * n);
  for (std::size_t i = 0; i < batch; ++i) {
    MapC<T> am(a.data().data() + i * m * k, m, k);
    MapM<T> ym(out.data() + i * m * n, m, n);
    if (transpose_b) {
      ym.noalias() = am * MapC<T>(b.data().data() + i * n * k, n, k).transpose();
    } else {
      ym.noalias() = am * MapC<T>(b.data().data() + i * k * n, k, n);
    }
  }
  return make_result<T>("bmm", {batch, m, n}, std::move(out), {a.node(), b.node()},
                        [batch, m, k, n, transpose_b](Node<T>& self) {
                          auto& pa = *self.parents[0];
                          auto& pb = *self.parents[1];
                          for (std::size_t i = 0; i < batch; ++i) {
                            MapC<T> g(self.grad.data() + i * m * n, m, n);
                            MapC<T> am(pa.value.data() + i * m * k, m, k);
                            if (transpose_b) {
                              MapC<T> bm(pb.value.data() + i * n * k, n, k);
                              if (pa.requires_grad) MapM<T>(pa.grad.data() + i * m * k, m, k).noalias() += g * bm;
                              if (pb.requires_grad) MapM<T>(pb.grad.data() + i * n * k, n, k).noalias() += g.transpose() * am;
                            } else {
                              MapC<T> bm(pb.value.data() + i * k * n, k, n);
                              if (pa.requires_grad) MapM<T>(pa.grad.data() + i * m * k, m, k).noalias() += g * bm.transpose();
                              if (pb.requires_grad) MapM<T>(pb.grad.data() + i * k * n, k, n).noalias() += am.transpose() * g;
                            }
                          }
                        });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t reps = broadcast_reps(a.shape(), b.shape(), "add");
  const std::size_t inner = b.numel();
  AlignedVector<T> out(a.numel());
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  for (std::size_t r = 0; r < reps; ++r) {
    for (std::size_t i = 0; i < inner; ++i) out[r * inner + i] = av[r * inner + i] + bv[i];
  }
  return make_result<T>("add", a.shape(), std::move(out), {a.node(), b.node()}, [reps, inner](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      for (std::size_t r = 0; r < reps; ++r) {
        for (std::size_t i = 0; i < inner; ++i) pb.grad[i] += self.grad[r * inner + i];
      }
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t reps = broadcast_reps(a.shape(), b.shape(), "sub");
  const std::size_t inner = b.numel();
  AlignedVector<T> out(a.numel());
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  for (std::size_t r = 0; r < reps; ++r) {
    for (std::size_t i = 0; i < inner; ++i) out[r * inner + i] = av[r * inner + i] - bv[i];
  }
  return make_result<T>("sub", a.shape(), std::move(out), {a.node(), b.node()}, [reps, inner](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      for (std::size_t r = 0; r < reps; ++r) {
        for (std::size_t i = 0; i < inner; ++i) pb.grad[i] -= self.grad[r * inner + i];
      }
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t reps = broadcast_reps(a.shape(), b.shape(), "mul");
  const std::size_t inner = b.numel();
  AlignedVector<T> out(a.numel());
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  for (std::size_t r = 0; r < reps; ++r) {
    for (std::size_t i = 0; i < inner; ++i) out[r * inner + i] = av[r * inner + i] * bv[i];
  }
  return make_result<T>("mul", a.shape(), std::move(out), {a.node(), b.node()}, [reps, inner](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    for (std::size_t r = 0; r < reps; ++r) {
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t j = r * inner + i;
        if (pa.requires_grad) pa.grad[j] += self.grad[j] * pb.value[i];
        if (pb.requires_grad) pb.grad[i] += self.grad[j] * pa.value[j];
      }
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  return unary<T>("scale", a, [s](T x) { return s * x; }, [s](T, T) { return s; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  return unary<T>("add_scalar", a, [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  return unary<T>("relu", a, [](T x) { return x > T(0) ? x : T(0); }, [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& a, T slope) {
  return unary<T>("leaky_relu", a, [slope](T x) { return x > T(0) ? x : slope * x; },
                  [slope](T x, T) { return x > T(0) ? T(1) : slope; });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
  // tanh approximation
  constexpr T c = T(0.7978845608028654);
  constexpr T k = T(0.044715);
  return unary<T>(
      "gelu", a,
      [](T x) { return T(0.5) * x * (T(1) + std::tanh(c * (x + k * x * x * x))); },
      [](T x, T) {
        const T u = c * (x + k * x * x * x);
        const T t = std::tanh(u);
        return T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * c * (T(1) + T(3) * k * x * x);
      });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  return unary<T>(
      "sigmoid", a,
      [](T x) {
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> log_sigmoid(const Tensor<T>& a) {
  return unary<T>(
      "log_sigmoid", a, [](T x) { return std::min(x, T(0)) - std::log1p(std::exp(-std::abs(x))); },
      [](T x, T) {
        // d/dx log sigmoid(x) = 1 - sigmoid(x) = sigmoid(-x)
        if (x >= T(0)) {
          const T e = std::exp(-x);
          return e / (T(1) + e);
        }
        return T(1) / (T(1) + std::exp(x));
      });
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  return unary<T>("square", a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& a) {
  if (a.rank() < 1) throw ArgumentError("softmax: needs rank >= 1");
  const std::size_t n = a.dim(-1), rows = a.numel() / n;
  AlignedVector<T> out(a.numel());
  const auto& av = a.node()->value;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = &av[r * n];
    T* y = &out[r * n];
    const T mx = *std::max_element(x, x + n);
    T total = T(0);
    for (std::size_t i = 0; i < n; ++i) total += (y[i] = std::exp(x[i] - mx));
    for (std::size_t i = 0; i < n; ++i) y[i] /= total;
  }
  return make_result<T>("softmax", a.shape(), std::move(out), {a.node()}, [rows, n](Node<T>& self) {
    auto& pa = *self.parents[0];
    for (std::size_t r = 0; r < rows; ++r) {
      const T* y = &self.value[r * n];
      const T* g = &self.grad[r * n];
      T dot = T(0);
      for (std::size_t i = 0; i < n; ++i) dot += g[i] * y[i];
      for (std::size_t i = 0; i < n; ++i) pa.grad[r * n + i] += y[i] * (g[i] - dot);
    }
  });
}

template <typename T>
Tensor<T> layernorm(const Tensor<T>& a, T eps) {
  if (a.rank() < 1) throw ArgumentError("layernorm: needs rank >= 1");
  const std::size_t n = a.dim(-1), rows = a.numel() / n;
  AlignedVector<T> out(a.numel());
  std::vector<T> inv_std(rows);
  const auto& av = a.node()->value;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = &av[r * n];
    T mu = T(0);
    for (std::size_t i = 0; i < n; ++i) mu += x[i];
    mu /= T(n);
    T var = T(0);
    for (std::size_t i = 0; i < n; ++i) var += (x[i] - mu) * (x[i] - mu);
    var /= T(n);
    inv_std[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t i = 0; i < n; ++i) out[r * n + i] = (x[i] - mu) * inv_std[r];
  }
  return make_result<T>("layernorm", a.shape(), std::move(out), {a.node()},
                        [rows, n, inv_std = std::move(inv_std)](Node<T>& self) {
                          auto& pa = *self.parents[0];
                          for (std::size_t r = 0; r < rows; ++r) {
                            const T* y = &self.value[r * n];
                            const T* g = &self.grad[r * n];
                            T gsum = T(0), gy = T(0);
                            for (std::size_t i = 0; i < n; ++i) {
                              gsum += g[i];
                              gy += g[i] * y[i];
                            }
                            for (std::size_t i = 0; i < n; ++i) {
                              pa.grad[r * n + i] += inv_std[r] * (g[i] - gsum / T(n) - y[i] * gy / T(n));
                            }
                          }
                        });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = T(0);
  for (T v : a.data()) total += v;
  return make_result<T>("sum", {}, {total}, {a.node()}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    for (auto& g : pa.grad) g += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  if (a.numel() == 0) throw ArgumentError("mean of empty tensor");
  const T n = T(a.numel());
  T total = T(0);
  for (T v : a.data()) total += v;
  return make_result<T>("mean", {}, {total / n}, {a.node()}, [n](Node<T>& self) {
    auto& pa = *self.parents[0];
    for (auto& g : pa.grad) g += self.grad[0] / n;
  });
}

template <typename T>
Tensor<T> max_over_positions(const Tensor<T>& a) {
  if (a.rank() < 2) throw ArgumentError("max_over_positions: needs [B, ...] input");
  const std::size_t batch = a.dim(0), n = a.numel() / batch;
  if (n == 0) throw ArgumentError("max_over_positions: no positions");
  AlignedVector<T> out(batch);
  std::vector<std::size_t> arg(batch);
  const auto& av = a.node()->value;
  for (std::size_t b = 0; b < batch; ++b) {
    const T* x = &av[b * n];
    arg[b] = static_cast<std::size_t>(std::max_element(x, x + n) - x);
    out[b] = x[arg[b]];
  }
  return make_result<T>("max_over_positions", {batch}, std::move(out), {a.node()},
                        [n, arg = std::move(arg)](Node<T>& self) {
                          auto& pa = *self.parents[0];
                          for (std::size_t b = 0; b < arg.size(); ++b) pa.grad[b * n + arg[b]] += self.grad[b];
                        });
}

template <typename T>
Tensor<T> cosine_similarity(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape() || a.rank() < 2) {
    throw ArgumentError("cosine_similarity: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()));
  }
  const std::size_t batch = a.dim(0), n = a.numel() / batch;
  AlignedVector<T> out(batch), na(batch), nb(batch), dots(batch);
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  for (std::size_t k = 0; k < batch; ++k) {
    T d = T(0), sa = T(0), sb = T(0);
    for (std::size_t i = 0; i < n; ++i) {
      const T x = av[k * n + i], y = bv[k * n + i];
      d += x * y;
      sa += x * x;
      sb += y * y;
    }
    na[k] = std::sqrt(sa);
    nb[k] = std::sqrt(sb);
    dots[k] = d;
    out[k] = (na[k] > T(0) && nb[k] > T(0)) ? d / (na[k] * nb[k]) : T(0);
  }
  return make_result<T>("cosine_similarity", {batch}, std::move(out), {a.node(), b.node()},
                        [n, na = std::move(na), nb = std::move(nb)](Node<T>& self) {
                          auto& pa = *self.parents[0];
                          auto& pb = *self.parents[1];
                          for (std::size_t k = 0; k < na.size(); ++k) {
                            if (!(na[k] > T(0) && nb[k] > T(0))) continue;
                            const T g = self.grad[k], c = self.value[k];
                            for (std::size_t i = 0; i < n; ++i) {
                              const T x = pa.value[k * n + i], y = pb.value[k * n + i];
                              if (pa.requires_grad) pa.grad[k * n + i] += g * (y / (na[k] * nb[k]) - c * x / (na[k] * na[k]));
                              if (pb.requires_grad) pb.grad[k * n + i] += g * (x / (na[k] * nb[k]) - c * y / (nb[k] * nb[k]));
                            }
                          }
                        });
}

template <typename T>
Tensor<T> truncated_hinge_pos(const Tensor<T>& x, T theta) {
  return unary<T>("truncated_hinge_pos", x, [theta](T v) { return std::max(T(0), theta - v); },
                  [theta](T v, T) { return theta - v > T(0) ? T(-1) : T(0); });
}

template <typename T>
Tensor<T> truncated_hinge_neg(const Tensor<T>& x, T theta) {
  return unary<T>("truncated_hinge_neg", x, [theta](T v) { return std::max(T(0), theta + v); },
                  [theta](T v, T) { return theta + v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (numel(shape) != a.numel()) {
    throw ArgumentError("reshape: " + to_string(a.shape()) + " -> " + to_string(shape));
  }
  return make_result<T>("reshape", std::move(shape), a.node()->value, {a.node()}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> slice_last(const Tensor<T>& a, std::size_t start, std::size_t len) {
  if (a.rank() < 1 || start + len > a.dim(-1) || len == 0) throw ArgumentError("slice_last: range out of bounds");
  const std::size_t n = a.dim(-1), rows = a.numel() / n;
  Shape shape = a.shape();
  shape.back() = len;
  AlignedVector<T> out(rows * len);
  const auto& av = a.node()->value;
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(&av[r * n + start], len, &out[r * len]);
  }
  return make_result<T>("slice_last", std::move(shape), std::move(out), {a.node()},
                        [rows, n, start, len](Node<T>& self) {
                          auto& pa = *self.parents[0];
                          for (std::size_t r = 0; r < rows; ++r) {
                            for (std::size_t i = 0; i < len; ++i) pa.grad[r * n + start + i] += self.grad[r * len + i];
                          }
                        });
}

template <typename T>
Tensor<T> split_heads(const Tensor<T>& x, std::size_t heads) {
  require_rank(x.shape(), 3, "split_heads");
  const std::size_t b = x.dim(0), t = x.dim(1), dm = x.dim(2);
  if (heads == 0 || dm % heads != 0) throw ArgumentError("split_heads: width not divisible by head count");
  const std::size_t d = dm / heads;
  AlignedVector<T> out(x.numel());
  const auto& xv = x.node()->value;
  // out[(bi*H + h), ti, di] = x[bi, ti, h*d + di]
  auto index_map = [=](std::size_t bi, std::size_t h, std::size_t ti, std::size_t di) {
    return std::pair{((bi * heads + h) * t + ti) * d + di, (bi * t + ti) * dm + h * d + di};
  };
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t ti = 0; ti < t; ++ti)
        for (std::size_t di = 0; di < d; ++di) {
          const auto [o, i] = index_map(bi, h, ti, di);
          out[o] = xv[i];
        }
  return make_result<T>("split_heads", {b * heads, t, d}, std::move(out), {x.node()}, [=](Node<T>& self) {
    auto& px = *self.parents[0];
    for (std::size_t bi = 0; bi < b; ++bi)
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t ti = 0; ti < t; ++ti)
          for (std::size_t di = 0; di < d; ++di) {
            const auto [o, i] = index_map(bi, h, ti, di);
            px.grad[i] += self.grad[o];
          }
  });
}

template <typename T>
Tensor<T> merge_heads(const Tensor<T>& x, std::size_t heads) {
  require_rank(x.shape(), 3, "merge_heads");
  if (heads == 0 || x.dim(0) % heads != 0) throw ArgumentError("merge_heads: batch not divisible by head count");
  const std::size_t b = x.dim(0) / heads, t = x.dim(1), d = x.dim(2), dm = d * heads;
  AlignedVector<T> out(x.numel());
  const auto& xv = x.node()->value;
  auto index_map = [=](std::size_t bi, std::size_t h, std::size_t ti, std::size_t di) {
    return std::pair{(bi * t + ti) * dm + h * d + di, ((bi * heads + h) * t + ti) * d + di};
  };
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t ti = 0; ti < t; ++ti)
        for (std::size_t di = 0; di < d; ++di) {
          const auto [o, i] = index_map(bi, h, ti, di);
          out[o] = xv[i];
        }
  return make_result<T>("merge_heads", {b, t, dm}, std::move(out), {x.node()}, [=](Node<T>& self) {
    auto& px = *self.parents[0];
    for (std::size_t bi = 0; bi < b; ++bi)
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t ti = 0; ti < t; ++ti)
          for (std::size_t di = 0; di < d; ++di) {
            const auto [o, i] = index_map(bi, h, ti, di);
            px.grad[i] += self.grad[o];
          }
  });
}

#define DFD_INSTANTIATE_OPS(T)                                                          \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);      \
  template Tensor<T> bmm(const Tensor<T>&, const Tensor<T>&, bool);                     \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> scale(const Tensor<T>&, T);                                        \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                   \
  template Tensor<T> relu(const Tensor<T>&);                                            \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                   \
  template Tensor<T> gelu(const Tensor<T>&);                                            \
  template Tensor<T> sigmoid(const Tensor<T>&);                                         \
  template Tensor<T> log_sigmoid(const Tensor<T>&);                                     \
  template Tensor<T> square(const Tensor<T>&);                                          \
  template Tensor<T> softmax(const Tensor<T>&);                                         \
  template Tensor<T> layernorm(const Tensor<T>&, T);                                    \
  template Tensor<T> sum(const Tensor<T>&);                                             \
  template Tensor<T> mean(const Tensor<T>&);                                            \
  template Tensor<T> max_over_positions(const Tensor<T>&);                              \
  template Tensor<T> cosine_similarity(const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> truncated_hinge_pos(const Tensor<T>&, T);                          \
  template Tensor<T> truncated_hinge_neg(const Tensor<T>&, T);                          \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                  \
  template Tensor<T> slice_last(const Tensor<T>&, std::size_t, std::size_t);            \
  template Tensor<T> split_heads(const Tensor<T>&, std::size_t);                        \
  template Tensor<T> merge_heads(const Tensor<T>&, std::size_t);

DFD_INSTANTIATE_OPS(float)
DFD_INSTANTIATE_OPS(double)

}  // namespace dfd::ad
