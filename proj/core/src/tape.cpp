#include "morphrl/tape.hpp"

#include <cmath>

namespace morphrl {

namespace {

void require(bool cond, const char* message) {
  if (!cond) throw std::logic_error(std::string("tape: ") + message);
}

}  // namespace

int ParamStore::add(const std::string& name, int rows, int cols) {
  require(rows > 0 && cols > 0, "parameter must have positive shape");
  require(index_.find(name) == index_.end(), "duplicate parameter name");
  Entry e;
  e.name = name;
  e.value = Mat::Zero(rows, cols);
  e.grad = Mat::Zero(rows, cols);
  e.adam_m = Mat::Zero(rows, cols);
  e.adam_v = Mat::Zero(rows, cols);
  const int id = static_cast<int>(entries_.size());
  entries_.push_back(std::move(e));
  index_.emplace(name, id);
  return id;
}

int ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

void ParamStore::zero_grads() {
  for (Entry& e : entries_) e.grad.setZero();
}

double ParamStore::grad_norm() const {
  double sq = 0.0;
  for (const Entry& e : entries_) sq += e.grad.squaredNorm();
  return std::sqrt(sq);
}

void ParamStore::clip_grads(double max_norm) {
  const double norm = grad_norm();
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (Entry& e : entries_) e.grad *= s;
  }
}

void ParamStore::adam_step(double lr, double beta1, double beta2, double eps, int t) {
  require(t >= 1, "adam step count must be >= 1");
  const double bc1 = 1.0 - std::pow(beta1, t);
  const double bc2 = 1.0 - std::pow(beta2, t);
  for (Entry& e : entries_) {
    e.adam_m = beta1 * e.adam_m + (1.0 - beta1) * e.grad;
    e.adam_v = beta2 * e.adam_v.array() + (1.0 - beta2) * e.grad.array().square();
    e.value.array() -=
        lr * (e.adam_m.array() / bc1) / ((e.adam_v.array() / bc2).sqrt() + eps);
  }
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const Entry& e : entries_) n += static_cast<std::size_t>(e.value.size());
  return n;
}

const char* Tape::op_name(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kParam: return "param";
    case Op::kLinearWN: return "linear_wn";
    case Op::kElu: return "elu";
    case Op::kExp: return "exp";
    case Op::kNeg: return "neg";
    case Op::kSquare: return "square";
    case Op::kClamp: return "clamp";
    case Op::kMul: return "mul";
    case Op::kAxpb: return "axpb";
    case Op::kAddConst: return "add_const";
    case Op::kScale: return "scale";
    case Op::kSoftmaxRowsTemp: return "softmax_rows_temp";
    case Op::kSumGroups: return "sum_groups";
    case Op::kAttendDot: return "attend_dot";
    case Op::kConcatCols: return "concat_cols";
    case Op::kGatherRows: return "gather_rows";
    case Op::kRepeatRows: return "repeat_rows";
    case Op::kRowSum: return "row_sum";
    case Op::kMeanAll: return "mean_all";
    case Op::kSumAll: return "sum_all";
    case Op::kMin2: return "min2";
  }
  return "unknown";
}

int Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

Mat& Tape::grad_buffer(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

int Tape::constant(Mat value) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

int Tape::param(int param_id) {
  require(params_ != nullptr, "tape has no parameter store");
  Node n;
  n.op = Op::kParam;
  n.param = param_id;
  n.value = params_->value(param_id);
  return push(std::move(n));
}

int Tape::linear_wn(int x, int g, int v, int bias) {
  const Mat& X = nodes_[x].value;
  const Mat& G = nodes_[g].value;
  const Mat& V = nodes_[v].value;
  const Mat& B = nodes_[bias].value;
  const int out = static_cast<int>(V.rows());
  require(G.rows() == out && G.cols() == 1, "linear_wn: g shape");
  require(B.rows() == out && B.cols() == 1, "linear_wn: bias shape");
  require(X.cols() == V.cols(), "linear_wn: input width");

  Node n;
  n.op = Op::kLinearWN;
  n.a = x;
  n.b = g;
  n.c = v;
  n.d = bias;
  Mat norms = V.rowwise().norm().cwiseMax(1e-30);
  Mat W = (G.array() / norms.array()).matrix().asDiagonal() * V;
  n.value.noalias() = X * W.transpose();
  n.value.rowwise() += B.col(0).transpose();
  n.aux = std::move(W);
  n.aux2 = std::move(norms);
  return push(std::move(n));
}

int Tape::elu(int x) {
  Node n;
  n.op = Op::kElu;
  n.a = x;
  n.value = nodes_[x].value.unaryExpr(
      [](double u) { return u > 0.0 ? u : std::expm1(u); });
  return push(std::move(n));
}

int Tape::exp_of(int x) {
  Node n;
  n.op = Op::kExp;
  n.a = x;
  n.value = nodes_[x].value.array().exp();
  return push(std::move(n));
}

int Tape::neg(int x) {
  Node n;
  n.op = Op::kNeg;
  n.a = x;
  n.value = -nodes_[x].value;
  return push(std::move(n));
}

int Tape::square(int x) {
  Node n;
  n.op = Op::kSquare;
  n.a = x;
  n.value = nodes_[x].value.array().square();
  return push(std::move(n));
}

int Tape::clamp(int x, double lo, double hi) {
  require(lo <= hi, "clamp: lo > hi");
  Node n;
  n.op = Op::kClamp;
  n.a = x;
  n.x0 = lo;
  n.x1 = hi;
  n.value = nodes_[x].value.cwiseMax(lo).cwiseMin(hi);
  return push(std::move(n));
}

int Tape::mul(int a, int b) {
  require(nodes_[a].value.rows() == nodes_[b].value.rows() &&
              nodes_[a].value.cols() == nodes_[b].value.cols(),
          "mul: shape mismatch");
  Node n;
  n.op = Op::kMul;
  n.a = a;
  n.b = b;
  n.value = nodes_[a].value.cwiseProduct(nodes_[b].value);
  return push(std::move(n));
}

int Tape::add(int a, int b) { return axpb(a, b, 1.0, 1.0); }

int Tape::sub(int a, int b) { return axpb(a, b, 1.0, -1.0); }

int Tape::axpb(int a, int b, double ca, double cb) {
  require(nodes_[a].value.rows() == nodes_[b].value.rows() &&
              nodes_[a].value.cols() == nodes_[b].value.cols(),
          "axpb: shape mismatch");
  Node n;
  n.op = Op::kAxpb;
  n.a = a;
  n.b = b;
  n.x0 = ca;
  n.x1 = cb;
  n.value = ca * nodes_[a].value + cb * nodes_[b].value;
  return push(std::move(n));
}

int Tape::add_const(int x, double c) {
  Node n;
  n.op = Op::kAddConst;
  n.a = x;
  n.x0 = c;
  n.value = nodes_[x].value.array() + c;
  return push(std::move(n));
}

int Tape::scale(int x, double c) {
  Node n;
  n.op = Op::kScale;
  n.a = x;
  n.x0 = c;
  n.value = c * nodes_[x].value;
  return push(std::move(n));
}

int Tape::softmax_rows_temp(int x, int log_tau) {
  const Mat& T = nodes_[log_tau].value;
  require(T.rows() == 1 && T.cols() == 1, "softmax_rows_temp: log_tau must be 1x1");
  Node n;
  n.op = Op::kSoftmaxRowsTemp;
  n.a = x;
  n.b = log_tau;
  const double s = std::exp(-T(0, 0));
  n.x0 = s;
  const Mat& X = nodes_[x].value;
  const int K = static_cast<int>(X.cols());
  Mat U = s * X;
  Mat m = U.rowwise().maxCoeff();
  Mat Y = (U - m.replicate(1, K)).array().exp();
  Mat sums = Y.rowwise().sum();
  n.value = Y.array() / sums.replicate(1, K).array();
  return push(std::move(n));
}

int Tape::sum_groups(int x, int group) {
  const Mat& X = nodes_[x].value;
  require(group >= 1 && X.rows() % group == 0, "sum_groups: rows not divisible");
  const int B = static_cast<int>(X.rows()) / group;
  Node n;
  n.op = Op::kSumGroups;
  n.a = x;
  n.group = group;
  n.value.resize(B, X.cols());
  for (int b = 0; b < B; ++b) {
    n.value.row(b) = X.middleRows(static_cast<Eigen::Index>(b) * group, group).colwise().sum();
  }
  return push(std::move(n));
}

int Tape::attend_dot(int zact, int alpha, int group) {
  const Mat& Z = nodes_[zact].value;
  const Mat& A = nodes_[alpha].value;
  require(group >= 1 && A.rows() % group == 0, "attend_dot: rows not divisible");
  require(A.rows() / group == Z.rows(), "attend_dot: batch mismatch");
  require(A.cols() == Z.cols(), "attend_dot: width mismatch");
  Node n;
  n.op = Op::kAttendDot;
  n.a = zact;
  n.b = alpha;
  n.group = group;
  const int B = static_cast<int>(Z.rows());
  n.value.resize(A.rows(), 1);
  for (int b = 0; b < B; ++b) {
    n.value.col(0).segment(static_cast<Eigen::Index>(b) * group, group).noalias() =
        A.middleRows(static_cast<Eigen::Index>(b) * group, group) * Z.row(b).transpose();
  }
  return push(std::move(n));
}

int Tape::concat_cols(int a, int b) {
  const Mat& A = nodes_[a].value;
  const Mat& B = nodes_[b].value;
  require(A.rows() == B.rows(), "concat_cols: row mismatch");
  Node n;
  n.op = Op::kConcatCols;
  n.a = a;
  n.b = b;
  n.value.resize(A.rows(), A.cols() + B.cols());
  n.value.leftCols(A.cols()) = A;
  n.value.rightCols(B.cols()) = B;
  return push(std::move(n));
}

int Tape::gather_rows(int x, std::vector<int> rows) {
  const Mat& X = nodes_[x].value;
  for (int r : rows) require(r >= 0 && r < X.rows(), "gather_rows: index out of range");
  Node n;
  n.op = Op::kGatherRows;
  n.a = x;
  n.value.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) n.value.row(i) = X.row(rows[i]);
  n.rows = std::move(rows);
  return push(std::move(n));
}

int Tape::repeat_rows(int x, int count) {
  const Mat& X = nodes_[x].value;
  require(X.rows() == 1, "repeat_rows: input must have one row");
  require(count >= 1, "repeat_rows: count must be >= 1");
  Node n;
  n.op = Op::kRepeatRows;
  n.a = x;
  n.group = count;
  n.value = X.replicate(count, 1);
  return push(std::move(n));
}

int Tape::row_sum(int x) {
  Node n;
  n.op = Op::kRowSum;
  n.a = x;
  n.value = nodes_[x].value.rowwise().sum();
  return push(std::move(n));
}

int Tape::mean_all(int x) {
  Node n;
  n.op = Op::kMeanAll;
  n.a = x;
  n.value = Mat::Constant(1, 1, nodes_[x].value.mean());
  return push(std::move(n));
}

int Tape::sum_all(int x) {
  Node n;
  n.op = Op::kSumAll;
  n.a = x;
  n.value = Mat::Constant(1, 1, nodes_[x].value.sum());
  return push(std::move(n));
}

int Tape::min2(int a, int b) {
  require(nodes_[a].value.rows() == nodes_[b].value.rows() &&
              nodes_[a].value.cols() == nodes_[b].value.cols(),
          "min2: shape mismatch");
  Node n;
  n.op = Op::kMin2;
  n.a = a;
  n.b = b;
  n.value = nodes_[a].value.cwiseMin(nodes_[b].value);
  return push(std::move(n));
}

std::optional<std::string> Tape::find_nonfinite() const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].value.allFinite()) {
      return std::string(op_name(nodes_[i].op)) + " #" + std::to_string(i);
    }
  }
  return std::nullopt;
}

void Tape::backward(int root) {
  require(root >= 0 && root < node_count(), "backward: bad root id");
  require(nodes_[root].value.rows() == 1 && nodes_[root].value.cols() == 1,
          "backward: root must be scalar");
  if (!std::isfinite(nodes_[root].value(0, 0))) {
    // Only now is the full scan worth its cost: name the earliest offender.
    const auto bad = find_nonfinite();
    throw NumericError("non-finite value in forward graph at node " +
                       bad.value_or("root #" + std::to_string(root)));
  }
  grad_buffer(root)(0, 0) += 1.0;
  for (int i = root; i >= 0; --i) {
    if (nodes_[i].grad.size() == 0) continue;
    backward_node(i);
  }
}

void Tape::backward_node(int id) {
  Node& n = nodes_[id];
  const Mat& dy = n.grad;
  switch (n.op) {
    case Op::kConstant:
      break;
    case Op::kParam:
      params_->grad(n.param) += dy;
      break;
    case Op::kLinearWN: {
      const Mat& X = nodes_[n.a].value;
      const Mat& G = nodes_[n.b].value;
      const Mat& V = nodes_[n.c].value;
      const Mat& W = n.aux;
      const Mat& norms = n.aux2;
      grad_buffer(n.a).noalias() += dy * W;
      Mat dW = dy.transpose() * X;
      grad_buffer(n.d) += dy.colwise().sum().transpose();
      Mat vhat = norms.cwiseInverse().asDiagonal() * V;
      Mat dot = dW.cwiseProduct(vhat).rowwise().sum();
      grad_buffer(n.b) += dot;
      Mat s = (G.array() / norms.array()).matrix();
      grad_buffer(n.c).noalias() += s.asDiagonal() * (dW - dot.asDiagonal() * vhat);
      break;
    }
    case Op::kElu: {
      const Mat& X = nodes_[n.a].value;
      grad_buffer(n.a).array() +=
          dy.array() * (X.array() > 0.0).select(Mat::Ones(X.rows(), X.cols()),
                                                n.value.array() + 1.0).array();
      break;
    }
    case Op::kExp:
      grad_buffer(n.a).array() += dy.array() * n.value.array();
      break;
    case Op::kNeg:
      grad_buffer(n.a) -= dy;
      break;
    case Op::kSquare:
      grad_buffer(n.a).array() += 2.0 * nodes_[n.a].value.array() * dy.array();
      break;
    case Op::kClamp: {
      const Mat& X = nodes_[n.a].value;
      grad_buffer(n.a).array() +=
          dy.array() * ((X.array() > n.x0) && (X.array() < n.x1)).cast<double>();
      break;
    }
    case Op::kMul:
      grad_buffer(n.a).array() += dy.array() * nodes_[n.b].value.array();
      grad_buffer(n.b).array() += dy.array() * nodes_[n.a].value.array();
      break;
    case Op::kAxpb:
      grad_buffer(n.a) += n.x0 * dy;
      grad_buffer(n.b) += n.x1 * dy;
      break;
    case Op::kAddConst:
      grad_buffer(n.a) += dy;
      break;
    case Op::kScale:
      grad_buffer(n.a) += n.x0 * dy;
      break;
    case Op::kSoftmaxRowsTemp: {
      const Mat& X = nodes_[n.a].value;
      const Mat& Y = n.value;
      const double s = n.x0;
      const int K = static_cast<int>(Y.cols());
      Mat inner = dy.cwiseProduct(Y).rowwise().sum();  // [B x 1]
      Mat dU = Y.cwiseProduct(dy - inner.replicate(1, K));
      grad_buffer(n.a) += s * dU;
      // d loss / d log_tau: U = exp(-log_tau) * X, dU/dlog_tau = -U.
      const double dt = -s * dU.cwiseProduct(X).sum();
      grad_buffer(n.b)(0, 0) += dt;
      break;
    }
    case Op::kSumGroups: {
      Mat& dx = grad_buffer(n.a);
      const int B = static_cast<int>(n.value.rows());
      for (int b = 0; b < B; ++b) {
        dx.middleRows(static_cast<Eigen::Index>(b) * n.group, n.group).rowwise() += dy.row(b);
      }
      break;
    }
    case Op::kAttendDot: {
      const Mat& Z = nodes_[n.a].value;
      const Mat& A = nodes_[n.b].value;
      Mat& dz = grad_buffer(n.a);
      Mat& da = grad_buffer(n.b);
      const int B = static_cast<int>(Z.rows());
      for (int b = 0; b < B; ++b) {
        const auto seg = dy.col(0).segment(static_cast<Eigen::Index>(b) * n.group, n.group);
        const auto Ab = A.middleRows(static_cast<Eigen::Index>(b) * n.group, n.group);
        dz.row(b).noalias() += (Ab.transpose() * seg).transpose();
        da.middleRows(static_cast<Eigen::Index>(b) * n.group, n.group).noalias() +=
            seg * Z.row(b);
      }
      break;
    }
    case Op::kConcatCols: {
      const int ac = static_cast<int>(nodes_[n.a].value.cols());
      const int bc = static_cast<int>(nodes_[n.b].value.cols());
      grad_buffer(n.a) += dy.leftCols(ac);
      grad_buffer(n.b) += dy.rightCols(bc);
      break;
    }
    case Op::kGatherRows: {
      Mat& dx = grad_buffer(n.a);
      for (std::size_t i = 0; i < n.rows.size(); ++i) dx.row(n.rows[i]) += dy.row(i);
      break;
    }
    case Op::kRepeatRows:
      grad_buffer(n.a) += dy.colwise().sum();
      break;
    case Op::kRowSum: {
      Mat& dx = grad_buffer(n.a);
      dx.colwise() += dy.col(0);
      break;
    }
    case Op::kMeanAll:
      grad_buffer(n.a).array() += dy(0, 0) / nodes_[n.a].value.size();
      break;
    case Op::kSumAll:
      grad_buffer(n.a).array() += dy(0, 0);
      break;
    case Op::kMin2: {
      const Mat& A = nodes_[n.a].value;
      const Mat& B = nodes_[n.b].value;
      Mat mask = (A.array() <= B.array()).cast<double>();
      grad_buffer(n.a).array() += dy.array() * mask.array();
      grad_buffer(n.b).array() += dy.array() * (1.0 - mask.array());
      break;
    }
  }
}

}  // namespace morphrl
