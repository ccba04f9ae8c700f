#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dadao {

using Index = int;

struct Edge {
  Index i;
  Index j;
  double weight = 1.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

// Undirected weighted graph on nodes 0..n-1. Edges are stored canonically
// (i < j), sorted, and unique; self-loops and negative weights are rejected.
class Graph {
 public:
  Graph() = default;
  explicit Graph(Index n);
  Graph(Index n, std::vector<Edge> edges);

  // Adds (i, j) with the given weight; re-adding an edge replaces its weight.
  void add_edge(Index i, Index j, double weight = 1.0);

  Index num_nodes() const { return n_; }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  bool has_edge(Index i, Index j) const;

  bool is_connected() const;
  // Component label per node; labels are 0..k-1 ordered by smallest member.
  std::vector<Index> components() const;

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  Index n_ = 0;
  std::vector<Edge> edges_;
};

// Dense graph Laplacian sum_e w_e (e_i - e_j)(e_i - e_j)^T with its
// eigendecomposition and pseudo-inverse computed once at construction.
class LaplacianMatrix {
 public:
  explicit LaplacianMatrix(Eigen::MatrixXd matrix);

  const Eigen::MatrixXd& matrix() const { return matrix_; }
  Index size() const { return static_cast<Index>(matrix_.rows()); }
  // Ascending.
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  const Eigen::MatrixXd& eigenvectors() const { return eigenvectors_; }
  const Eigen::MatrixXd& pinv() const { return pinv_; }

  // Eigenvalues at or below this are treated as zero.
  double rank_tolerance() const { return tolerance_; }
  // Number of eigenvalues above the rank tolerance.
  Index rank() const;
  // A connected Laplacian has exactly one zero eigenvalue (n >= 2).
  bool is_connected() const { return size() >= 1 && rank() == size() - 1; }
  double trace() const { return matrix_.trace(); }

  LaplacianMatrix scaled(double c) const;

 private:
  Eigen::MatrixXd matrix_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd eigenvectors_;
  Eigen::MatrixXd pinv_;
  double tolerance_ = 0.0;
};

struct SpectralReport {
  double chi1 = 0.0;
  double chi2 = 0.0;
  double spectral_gap = 0.0;
  double trace = 0.0;
};

LaplacianMatrix build_laplacian(const Graph& g);

// Moore-Penrose pseudo-inverse of a symmetric PSD matrix. Eigenvalues below
// 1e-10 times the largest are dropped.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& symmetric_psd);

// 1 / (smallest eigenvalue on the complement of the all-ones vector).
// Throws DisconnectedError when that eigenvalue is numerically zero.
double chi1(const LaplacianMatrix& lap);

// Half the largest effective resistance (e_i-e_j)^T L^+ (e_i-e_j) over the
// edges of g. Throws DisconnectedError on a disconnected graph.
double chi2(const LaplacianMatrix& lap, const Graph& g);

// Smallest positive eigenvalue over the largest one.
double spectral_gap(const LaplacianMatrix& lap);

SpectralReport spectral_report(const Graph& g);

// Piecewise-constant sequence of graphs; graph k is active on
// [k/f, (k+1)/f), cycling through the list.
class TimeVaryingTopology {
 public:
  TimeVaryingTopology(std::vector<Graph> graphs, double switch_frequency);

  static TimeVaryingTopology fixed(Graph g) { return TimeVaryingTopology({std::move(g)}, 1.0); }

  Index num_nodes() const { return graphs_.front().num_nodes(); }
  double switch_frequency() const { return frequency_; }
  const std::vector<Graph>& graphs() const { return graphs_; }
  const std::vector<LaplacianMatrix>& laplacians() const { return laplacians_; }

  std::size_t active_index(double t) const;
  const Graph& active(double t) const { return graphs_[active_index(t)]; }
  const LaplacianMatrix& active_laplacian(double t) const { return laplacians_[active_index(t)]; }

  // sup over the sequence of chi1[L_q / |E_q|] and chi2[L_q / |E_q|].
  double chi1_normalized() const;
  double chi2_normalized() const;

 private:
  std::vector<Graph> graphs_;
  std::vector<LaplacianMatrix> laplacians_;
  double frequency_;
};

// Global communication rate sqrt(2 sup chi1[L/|E|] sup chi2[L/|E|]); with
// uniform edge sampling at this rate the gossip matrix satisfies
// 2 chi1* chi2* <= 1.
double lambda_star(const TimeVaryingTopology& topo);

enum class GraphKind { Star, Line, Cycle, Complete, Grid, RandomGeometric };

struct GraphFamily {
  GraphKind kind = GraphKind::Complete;
  double radius = 0.3;  // random geometric only
  int dim = 2;          // grid only
};

GraphKind parse_graph_kind(const std::string& name);
std::string to_string(GraphKind kind);

// Connected unit-weight graph of the requested family. Random geometric
// graphs are stitched into one component by linking consecutive components
// through a random node of each.
Graph generate(const GraphFamily& family, Index n, std::uint64_t seed);

// Sequence of `length` graphs; graph q uses the substream q of `seed`.
TimeVaryingTopology generate_sequence(const GraphFamily& family, Index n, std::size_t length,
                                      double frequency, std::uint64_t seed);

// Edge-list text format:
//   n <count> f <frequency>
//   graph 0
//   i j weight
//   ...
//   graph 1
//   ...
// Weight is optional on input (default 1); numbers are written with 17
// significant digits.
void write_edge_list(std::ostream& os, const TimeVaryingTopology& topo);
TimeVaryingTopology read_edge_list(std::istream& is);
void save_edge_list(const std::string& path, const TimeVaryingTopology& topo);
TimeVaryingTopology load_edge_list(const std::string& path);

}  // namespace dadao
