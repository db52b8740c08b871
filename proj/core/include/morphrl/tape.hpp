#pragma once

#include <Eigen/Core>

#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace morphrl {

using Mat = Eigen::MatrixXd;

/// Raised when a non-finite value is detected in a forward graph or a loss;
/// the trainer maps it to the numeric-failure exit code.
class NumericError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Named parameter tensors with gradients and Adam moment buffers.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Mat value;
    Mat grad;
    Mat adam_m;
    Mat adam_v;
  };

  int add(const std::string& name, int rows, int cols);
  int find(const std::string& name) const;  // -1 if absent
  int size() const { return static_cast<int>(entries_.size()); }

  Entry& entry(int id) { return entries_[id]; }
  const Entry& entry(int id) const { return entries_[id]; }
  Mat& value(int id) { return entries_[id].value; }
  const Mat& value(int id) const { return entries_[id].value; }
  Mat& grad(int id) { return entries_[id].grad; }

  void zero_grads();
  double grad_norm() const;
  /// Scales all gradients down so the global norm is at most max_norm.
  void clip_grads(double max_norm);
  /// One bias-corrected adaptive-moment update; t is the 1-based step count.
  void adam_step(double lr, double beta1, double beta2, double eps, int t);

  std::size_t parameter_count() const;

 private:
  // Deque so value()/grad() references survive later add() calls.
  std::deque<Entry> entries_;
  std::unordered_map<std::string, int> index_;
};

/// Reverse-mode differentiation tape over dense double matrices. Build a
/// graph with the op methods (each returns a node id), then call backward()
/// on a scalar node; parameter gradients accumulate into the ParamStore.
class Tape {
 public:
  explicit Tape(ParamStore* params = nullptr) : params_(params) {}

  int constant(Mat value);
  int param(int param_id);

  /// x [B x in] through a WeightNorm dense layer: row r of the effective
  /// weight is g_r * v_r / |v_r|; returns x * W^T + bias^T broadcast.
  /// g: [out x 1], v: [out x in], bias: [out x 1] node ids.
  int linear_wn(int x, int g, int v, int bias);

  int elu(int x);
  int exp_of(int x);
  int neg(int x);
  int square(int x);
  int clamp(int x, double lo, double hi);
  int mul(int a, int b);
  int add(int a, int b);
  int sub(int a, int b);
  /// ca * a + cb * b, elementwise.
  int axpb(int a, int b, double ca, double cb);
  int add_const(int x, double c);
  int scale(int x, double c);
  /// Row-wise softmax of x * exp(-log_tau); log_tau is a 1x1 node.
  int softmax_rows_temp(int x, int log_tau);
  /// [B*group x K] -> [B x K], summing each consecutive block of `group` rows.
  int sum_groups(int x, int group);
  /// zact [B x K], alpha [B*group x K] -> [B*group x 1], row i giving
  /// dot(zact[i / group], alpha[i]).
  int attend_dot(int zact, int alpha, int group);
  int concat_cols(int a, int b);
  /// y[i, :] = x[rows[i], :]; rows need not be a permutation.
  int gather_rows(int x, std::vector<int> rows);
  /// x [1 x K] replicated to [count x K].
  int repeat_rows(int x, int count);
  /// [B x K] -> [B x 1] row sums.
  int row_sum(int x);
  int mean_all(int x);
  int sum_all(int x);
  /// Elementwise minimum; gradient follows the smaller branch (ties -> a).
  int min2(int a, int b);

  /// The reference stays valid while further nodes are added.
  const Mat& value(int id) const { return nodes_[id].value; }
  /// Node gradient after backward(); zero-sized if the node was unreached.
  /// The reference stays valid while further nodes are added.
  const Mat& grad(int id) const { return nodes_[id].grad; }

  /// Reverse pass from a 1x1 root. A non-finite root value raises
  /// NumericError naming the earliest non-finite node in the graph.
  void backward(int root);

  /// Earliest node with a non-finite value, as "op #id", if any.
  std::optional<std::string> find_nonfinite() const;

  int node_count() const { return static_cast<int>(nodes_.size()); }

 private:
  enum class Op {
    kConstant,
    kParam,
    kLinearWN,
    kElu,
    kExp,
    kNeg,
    kSquare,
    kClamp,
    kMul,
    kAxpb,
    kAddConst,
    kScale,
    kSoftmaxRowsTemp,
    kSumGroups,
    kAttendDot,
    kConcatCols,
    kGatherRows,
    kRepeatRows,
    kRowSum,
    kMeanAll,
    kSumAll,
    kMin2,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    int c = -1;
    int d = -1;
    int param = -1;
    int group = 0;
    double x0 = 0.0;
    double x1 = 0.0;
    std::vector<int> rows;
    Mat value;
    Mat grad;
    Mat aux;   // op-specific cache (e.g. effective W for LinearWN)
    Mat aux2;  // secondary cache (e.g. row norms)
  };

  static const char* op_name(Op op);
  int push(Node node);
  Mat& grad_buffer(int id);
  void backward_node(int id);

  ParamStore* params_ = nullptr;
  // Deque so references returned by value()/grad() stay valid while new
  // nodes are appended to the graph.
  std::deque<Node> nodes_;
};

}  // namespace morphrl
