#include "dadao/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "dadao/error.hpp"
#include "dadao/rng.hpp"

namespace dadao {

namespace {

constexpr double kRelativeRankTolerance = 1e-10;

Edge canonical(Index i, Index j, double w) { return i < j ? Edge{i, j, w} : Edge{j, i, w}; }

bool edge_less(const Edge& a, const Edge& b) { return a.i != b.i ? a.i < b.i : a.j < b.j; }

// Union-find over node indices, path halving.
class DisjointSets {
 public:
  explicit DisjointSets(Index n) : parent_(static_cast<std::size_t>(n)) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  Index find(Index v) {
    while (parent_[v] != v) {
      parent_[v] = parent_[parent_[v]];
      v = parent_[v];
    }
    return v;
  }
  void unite(Index a, Index b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<Index> parent_;
};

void require_connected(const LaplacianMatrix& lap, const char* what) {
  if (lap.size() < 2) throw ParameterError(std::string(what) + ": needs at least 2 nodes");
  if (!lap.is_connected()) throw DisconnectedError(std::string(what) + ": graph is not connected");
}

}  // namespace

Graph::Graph(Index n) : n_(n) {
  if (n < 1) throw ParameterError("graph: node count must be positive");
}

Graph::Graph(Index n, std::vector<Edge> edges) : Graph(n) {
  for (const auto& e : edges) add_edge(e.i, e.j, e.weight);
}

void Graph::add_edge(Index i, Index j, double weight) {
  if (i < 0 || j < 0 || i >= n_ || j >= n_) throw ParameterError("graph: edge endpoint out of range");
  if (i == j) throw ParameterError("graph: self-loops are not allowed");
  if (!(weight >= 0.0) || !std::isfinite(weight)) throw ParameterError("graph: edge weight must be finite and >= 0");
  const Edge e = canonical(i, j, weight);
  auto it = std::lower_bound(edges_.begin(), edges_.end(), e, edge_less);
  if (it != edges_.end() && it->i == e.i && it->j == e.j)
    it->weight = weight;
  else
    edges_.insert(it, e);
}

bool Graph::has_edge(Index i, Index j) const {
  const Edge e = canonical(i, j, 0.0);
  return std::binary_search(edges_.begin(), edges_.end(), e, edge_less);
}

std::vector<Index> Graph::components() const {
  DisjointSets sets(n_);
  for (const auto& e : edges_) sets.unite(e.i, e.j);
  // Roots are the smallest member of each set, so labelling in node order
  // numbers components by their smallest member.
  std::vector<Index> label(static_cast<std::size_t>(n_), -1);
  std::vector<Index> root_label(static_cast<std::size_t>(n_), -1);
  Index next = 0;
  for (Index v = 0; v < n_; ++v) {
    const Index r = sets.find(v);
    if (root_label[r] < 0) root_label[r] = next++;
    label[v] = root_label[r];
  }
  return label;
}

bool Graph::is_connected() const {
  const auto labels = components();
  return std::all_of(labels.begin(), labels.end(), [](Index l) { return l == 0; });
}

LaplacianMatrix::LaplacianMatrix(Eigen::MatrixXd matrix) : matrix_(std::move(matrix)) {
  if (matrix_.rows() != matrix_.cols()) throw ParameterError("laplacian: matrix must be square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(matrix_);
  eigenvalues_ = solver.eigenvalues();
  eigenvectors_ = solver.eigenvectors();
  const double largest = eigenvalues_.size() > 0 ? eigenvalues_.cwiseAbs().maxCoeff() : 0.0;
  tolerance_ = kRelativeRankTolerance * largest;
  pinv_ = Eigen::MatrixXd::Zero(matrix_.rows(), matrix_.cols());
  for (Eigen::Index k = 0; k < eigenvalues_.size(); ++k) {
    if (eigenvalues_[k] > tolerance_) {
      const auto v = eigenvectors_.col(k);
      pinv_.noalias() += (1.0 / eigenvalues_[k]) * v * v.transpose();
    }
  }
}

Index LaplacianMatrix::rank() const {
  Index r = 0;
  for (Eigen::Index k = 0; k < eigenvalues_.size(); ++k)
    if (eigenvalues_[k] > tolerance_) ++r;
  return r;
}

LaplacianMatrix LaplacianMatrix::scaled(double c) const {
  if (!(c > 0.0)) throw ParameterError("laplacian: scale must be positive");
  return LaplacianMatrix(c * matrix_);
}

LaplacianMatrix build_laplacian(const Graph& g) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(g.num_nodes(), g.num_nodes());
  for (const auto& e : g.edges()) {
    m(e.i, e.i) += e.weight;
    m(e.j, e.j) += e.weight;
    m(e.i, e.j) -= e.weight;
    m(e.j, e.i) -= e.weight;
  }
  return LaplacianMatrix(std::move(m));
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& symmetric_psd) {
  return LaplacianMatrix(symmetric_psd).pinv();
}

double chi1(const LaplacianMatrix& lap) {
  require_connected(lap, "chi1");
  // The all-ones vector spans the kernel, so the second eigenvalue is the
  // infimum of the Rayleigh quotient on its orthogonal complement.
  return 1.0 / lap.eigenvalues()[1];
}

double chi2(const LaplacianMatrix& lap, const Graph& g) {
  if (lap.size() != g.num_nodes()) throw ParameterError("chi2: laplacian and graph sizes differ");
  require_connected(lap, "chi2");
  const auto& p = lap.pinv();
  double worst = 0.0;
  for (const auto& e : g.edges())
    worst = std::max(worst, p(e.i, e.i) + p(e.j, e.j) - 2.0 * p(e.i, e.j));
  return 0.5 * worst;
}

double spectral_gap(const LaplacianMatrix& lap) {
  require_connected(lap, "spectral_gap");
  const auto& ev = lap.eigenvalues();
  return ev[1] / ev[ev.size() - 1];
}

SpectralReport spectral_report(const Graph& g) {
  const auto lap = build_laplacian(g);
  return {chi1(lap), chi2(lap, g), spectral_gap(lap), lap.trace()};
}

TimeVaryingTopology::TimeVaryingTopology(std::vector<Graph> graphs, double switch_frequency)
    : graphs_(std::move(graphs)), frequency_(switch_frequency) {
  if (graphs_.empty()) throw ParameterError("topology: graph list is empty");
  if (!(frequency_ > 0.0) || !std::isfinite(frequency_))
    throw ParameterError("topology: switch frequency must be positive");
  const Index n = graphs_.front().num_nodes();
  laplacians_.reserve(graphs_.size());
  for (std::size_t q = 0; q < graphs_.size(); ++q) {
    if (graphs_[q].num_nodes() != n) throw ParameterError("topology: graphs have different node counts");
    if (!graphs_[q].is_connected())
      throw DisconnectedError("topology: graph " + std::to_string(q) + " is not connected");
    laplacians_.push_back(build_laplacian(graphs_[q]));
  }
}

std::size_t TimeVaryingTopology::active_index(double t) const {
  if (graphs_.size() == 1 || !(t > 0.0)) return 0;
  const double slot = std::floor(t * frequency_);
  return static_cast<std::size_t>(std::fmod(slot, static_cast<double>(graphs_.size())));
}

double TimeVaryingTopology::chi1_normalized() const {
  double worst = 0.0;
  for (std::size_t q = 0; q < graphs_.size(); ++q)
    worst = std::max(worst, chi1(laplacians_[q]) * static_cast<double>(graphs_[q].num_edges()));
  return worst;
}

double TimeVaryingTopology::chi2_normalized() const {
  double worst = 0.0;
  for (std::size_t q = 0; q < graphs_.size(); ++q)
    worst = std::max(worst, chi2(laplacians_[q], graphs_[q]) * static_cast<double>(graphs_[q].num_edges()));
  return worst;
}

double lambda_star(const TimeVaryingTopology& topo) {
  // chi[L / c] = c chi[L], so dividing by |E| multiplies both constants.
  return std::sqrt(2.0 * topo.chi1_normalized() * topo.chi2_normalized());
}

GraphKind parse_graph_kind(const std::string& name) {
  if (name == "star") return GraphKind::Star;
  if (name == "line") return GraphKind::Line;
  if (name == "cycle") return GraphKind::Cycle;
  if (name == "complete") return GraphKind::Complete;
  if (name == "grid") return GraphKind::Grid;
  if (name == "random_geometric" || name == "geometric") return GraphKind::RandomGeometric;
  throw ParameterError("unknown graph kind '" + name + "'");
}

std::string to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::Star: return "star";
    case GraphKind::Line: return "line";
    case GraphKind::Cycle: return "cycle";
    case GraphKind::Complete: return "complete";
    case GraphKind::Grid: return "grid";
    case GraphKind::RandomGeometric: return "random_geometric";
  }
  return "unknown";
}

namespace {

Graph make_grid(Index n, int dim) {
  if (dim < 1) throw ParameterError("grid: dimension must be >= 1");
  const auto side = static_cast<Index>(std::llround(std::pow(static_cast<double>(n), 1.0 / dim)));
  Index total = 1;
  for (int k = 0; k < dim; ++k) total *= side;
  if (total != n) throw ParameterError("grid: n must be a perfect power of the dimension");
  Graph g(n);
  Index stride = 1;
  for (int k = 0; k < dim; ++k) {
    for (Index v = 0; v < n; ++v)
      if ((v / stride) % side + 1 < side) g.add_edge(v, v + stride);
    stride *= side;
  }
  return g;
}

Graph make_random_geometric(Index n, double radius, std::uint64_t seed) {
  if (!(radius > 0.0) || radius > std::sqrt(2.0)) throw ParameterError("random_geometric: radius must be in (0, sqrt(2)]");
  CounterRng rng(seed, streams::kGraph);
  std::vector<std::pair<double, double>> pts(static_cast<std::size_t>(n));
  for (auto& p : pts) {
    p.first = rng.uniform();
    p.second = rng.uniform();
  }
  Graph g(n);
  for (Index a = 0; a < n; ++a)
    for (Index b = a + 1; b < n; ++b)
      if (std::hypot(pts[a].first - pts[b].first, pts[a].second - pts[b].second) < radius) g.add_edge(a, b);

  const auto labels = g.components();
  const Index count = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(count));
  for (Index v = 0; v < n; ++v) members[labels[v]].push_back(v);
  CounterRng stitch = rng.split(1);
  for (Index c = 0; c + 1 < count; ++c) {
    const auto& from = members[c];
    const auto& to = members[c + 1];
    g.add_edge(from[stitch.uniform_index(from.size())], to[stitch.uniform_index(to.size())]);
  }
  return g;
}

}  // namespace

Graph generate(const GraphFamily& family, Index n, std::uint64_t seed) {
  if (n < 2) throw ParameterError("generate: n must be >= 2");
  Graph g(n);
  switch (family.kind) {
    case GraphKind::Star:
      for (Index v = 1; v < n; ++v) g.add_edge(0, v);
      return g;
    case GraphKind::Line:
      for (Index v = 0; v + 1 < n; ++v) g.add_edge(v, v + 1);
      return g;
    case GraphKind::Cycle:
      for (Index v = 0; v + 1 < n; ++v) g.add_edge(v, v + 1);
      if (n > 2) g.add_edge(n - 1, 0);
      return g;
    case GraphKind::Complete:
      for (Index a = 0; a < n; ++a)
        for (Index b = a + 1; b < n; ++b) g.add_edge(a, b);
      return g;
    case GraphKind::Grid:
      return make_grid(n, family.dim);
    case GraphKind::RandomGeometric:
      return make_random_geometric(n, family.radius, seed);
  }
  throw ParameterError("generate: unknown graph kind");
}

TimeVaryingTopology generate_sequence(const GraphFamily& family, Index n, std::size_t length, double frequency,
                                      std::uint64_t seed) {
  if (length == 0) throw ParameterError("generate_sequence: length must be positive");
  std::vector<Graph> graphs;
  graphs.reserve(length);
  CounterRng root(seed);
  for (std::size_t q = 0; q < length; ++q) graphs.push_back(generate(family, n, root.split(q)()));
  return TimeVaryingTopology(std::move(graphs), frequency);
}

void write_edge_list(std::ostream& os, const TimeVaryingTopology& topo) {
  const auto old_precision = os.precision(17);
  os << "n " << topo.num_nodes() << " f " << topo.switch_frequency() << '\n';
  for (std::size_t q = 0; q < topo.graphs().size(); ++q) {
    os << "graph " << q << '\n';
    for (const auto& e : topo.graphs()[q].edges()) os << e.i << ' ' << e.j << ' ' << e.weight << '\n';
  }
  os.precision(old_precision);
}

TimeVaryingTopology read_edge_list(std::istream& is) {
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) -> FormatError {
    return FormatError("edge list line " + std::to_string(line_no) + ": " + msg);
  };
  auto next_line = [&]() -> bool {
    while (std::getline(is, line)) {
      ++line_no;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      return true;
    }
    return false;
  };

  if (!next_line()) throw FormatError("edge list: missing header");
  std::istringstream header(line);
  std::string n_tag, f_tag;
  Index n = 0;
  double f = 0.0;
  if (!(header >> n_tag >> n >> f_tag >> f) || n_tag != "n" || f_tag != "f") throw fail("expected 'n <count> f <frequency>'");

  std::vector<Graph> graphs;
  while (next_line()) {
    std::istringstream ls(line);
    std::string first;
    ls >> first;
    if (first == "graph") {
      std::size_t index = 0;
      if (!(ls >> index) || index != graphs.size()) throw fail("graph blocks must be numbered 0, 1, 2, ...");
      graphs.emplace_back(n);
      continue;
    }
    if (graphs.empty()) throw fail("edge before the first 'graph' line");
    std::istringstream es(line);
    Index i = 0, j = 0;
    double w = 1.0;
    if (!(es >> i >> j)) throw fail("expected 'i j [weight]'");
    if (!(es >> w)) w = 1.0;
    try {
      graphs.back().add_edge(i, j, w);
    } catch (const ParameterError& e) {
      throw fail(e.what());
    }
  }
  if (graphs.empty()) throw FormatError("edge list: no graph blocks");
  return TimeVaryingTopology(std::move(graphs), f);
}

void save_edge_list(const std::string& path, const TimeVaryingTopology& topo) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  write_edge_list(os, topo);
}

TimeVaryingTopology load_edge_list(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open '" + path + "'");
  return read_edge_list(is);
}

}  // namespace dadao
