#include "predec/blossom.hpp"

#include <algorithm>
#include <stdexcept>

namespace predec {

namespace {

class Blossom {
 public:
  Blossom(int n, const std::vector<WeightedEdge>& edges, bool maxcard)
      : n_(n), edges_(edges), maxcard_(maxcard) {}

  std::vector<int> run();

 private:
  using I = std::int64_t;

  I slack(int k) const { return dual_[edges_[k].u] + dual_[edges_[k].v] - 2 * edges_[k].w; }

  void leaves(int b, std::vector<int>& out) const {
    if (b < n_) {
      out.push_back(b);
      return;
    }
    for (int t : childs_[b]) leaves(t, out);
  }
  std::vector<int> leaves(int b) const {
    std::vector<int> out;
    leaves(b, out);
    return out;
  }

  void assign_label(int w, int t, int p);
  int scan_blossom(int v, int w);
  void add_blossom(int base, int k);
  void expand_blossom(int b, bool endstage);
  void augment_blossom(int b, int v);
  void augment_matching(int k);

  int n_;
  const std::vector<WeightedEdge>& edges_;
  bool maxcard_;
  std::vector<int> endpoint_;
  std::vector<std::vector<int>> neighbend_;
  std::vector<int> mate_, label_, labelend_, inblossom_, parent_, base_, bestedge_, unused_;
  std::vector<std::vector<int>> childs_, endps_, bestedges_;
  std::vector<char> has_bestedges_;
  std::vector<I> dual_;
  std::vector<char> allow_;
  std::vector<int> queue_;
};

void Blossom::assign_label(int w, int t, int p) {
  const int b = inblossom_[w];
  label_[w] = label_[b] = t;
  labelend_[w] = labelend_[b] = p;
  bestedge_[w] = bestedge_[b] = -1;
  if (t == 1) {
    leaves(b, queue_);
  } else if (t == 2) {
    const int base = base_[b];
    assign_label(endpoint_[mate_[base]], 1, mate_[base] ^ 1);
  }
}

int Blossom::scan_blossom(int v, int w) {
  std::vector<int> path;
  int base = -1;
  while (v != -1 || w != -1) {
    int b = inblossom_[v];
    if (label_[b] & 4) {
      base = base_[b];
      break;
    }
    path.push_back(b);
    label_[b] = 5;
    if (labelend_[b] == -1) {
      v = -1;
    } else {
      v = endpoint_[labelend_[b]];
      b = inblossom_[v];
      v = endpoint_[labelend_[b]];
    }
    if (w != -1) std::swap(v, w);
  }
  for (int b : path) label_[b] = 1;
  return base;
}

void Blossom::add_blossom(int base, int k) {
  int v = edges_[k].u, w = edges_[k].v;
  const int bb = inblossom_[base];
  int bv = inblossom_[v], bw = inblossom_[w];
  const int b = unused_.back();
  unused_.pop_back();
  base_[b] = base;
  parent_[b] = -1;
  parent_[bb] = b;
  std::vector<int> path, endps;
  while (bv != bb) {
    parent_[bv] = b;
    path.push_back(bv);
    endps.push_back(labelend_[bv]);
    v = endpoint_[labelend_[bv]];
    bv = inblossom_[v];
  }
  path.push_back(bb);
  std::reverse(path.begin(), path.end());
  std::reverse(endps.begin(), endps.end());
  endps.push_back(2 * k);
  while (bw != bb) {
    parent_[bw] = b;
    path.push_back(bw);
    endps.push_back(labelend_[bw] ^ 1);
    w = endpoint_[labelend_[bw]];
    bw = inblossom_[w];
  }
  childs_[b] = path;
  endps_[b] = endps;
  label_[b] = 1;
  labelend_[b] = labelend_[bb];
  dual_[b] = 0;
  for (int leaf : leaves(b)) {
    if (label_[inblossom_[leaf]] == 2) queue_.push_back(leaf);
    inblossom_[leaf] = b;
  }
  std::vector<int> bestto(2 * n_, -1);
  for (int sub : path) {
    std::vector<std::vector<int>> lists;
    if (!has_bestedges_[sub]) {
      for (int leaf : leaves(sub)) {
        std::vector<int> l;
        for (int p : neighbend_[leaf]) l.push_back(p / 2);
        lists.push_back(std::move(l));
      }
    } else {
      lists.push_back(bestedges_[sub]);
    }
    for (const auto& l : lists)
      for (int kk : l) {
        int i = edges_[kk].u, j = edges_[kk].v;
        if (inblossom_[j] == b) std::swap(i, j);
        const int bj = inblossom_[j];
        if (bj != b && label_[bj] == 1 && (bestto[bj] == -1 || slack(kk) < slack(bestto[bj]))) bestto[bj] = kk;
      }
    bestedges_[sub].clear();
    has_bestedges_[sub] = 0;
    bestedge_[sub] = -1;
  }
  bestedges_[b].clear();
  for (int kk : bestto)
    if (kk != -1) bestedges_[b].push_back(kk);
  has_bestedges_[b] = 1;
  bestedge_[b] = -1;
  for (int kk : bestedges_[b])
    if (bestedge_[b] == -1 || slack(kk) < slack(bestedge_[b])) bestedge_[b] = kk;
}

void Blossom::expand_blossom(int b, bool endstage) {
  for (int s : childs_[b]) {
    parent_[s] = -1;
    if (s < n_) {
      inblossom_[s] = s;
    } else if (endstage && dual_[s] == 0) {
      expand_blossom(s, endstage);
    } else {
      for (int leaf : leaves(s)) inblossom_[leaf] = s;
    }
  }
  if (!endstage && label_[b] == 2) {
    const auto& ch = childs_[b];
    const int len = static_cast<int>(ch.size());
    auto at = [&](const std::vector<int>& v, int idx) { return v[((idx % len) + len) % len]; };
    const int entrychild = inblossom_[endpoint_[labelend_[b] ^ 1]];
    int j = static_cast<int>(std::find(ch.begin(), ch.end(), entrychild) - ch.begin());
    int jstep, endptrick;
    if (j & 1) {
      j -= len;
      jstep = 1;
      endptrick = 0;
    } else {
      jstep = -1;
      endptrick = 1;
    }
    int p = labelend_[b];
    while (j != 0) {
      label_[endpoint_[p ^ 1]] = 0;
      label_[endpoint_[at(endps_[b], j - endptrick) ^ endptrick ^ 1]] = 0;
      assign_label(endpoint_[p ^ 1], 2, p);
      allow_[at(endps_[b], j - endptrick) / 2] = 1;
      j += jstep;
      p = at(endps_[b], j - endptrick) ^ endptrick;
      allow_[p / 2] = 1;
      j += jstep;
    }
    int bv = at(ch, j);
    label_[endpoint_[p ^ 1]] = label_[bv] = 2;
    labelend_[endpoint_[p ^ 1]] = labelend_[bv] = p;
    bestedge_[bv] = -1;
    j += jstep;
    while (at(ch, j) != entrychild) {
      bv = at(ch, j);
      if (label_[bv] == 1) {
        j += jstep;
        continue;
      }
      int found = -1;
      for (int leaf : leaves(bv))
        if (label_[leaf] != 0) {
          found = leaf;
          break;
        }
      if (found >= 0) {
        label_[found] = 0;
        label_[endpoint_[mate_[base_[bv]]]] = 0;
        assign_label(found, 2, labelend_[found]);
      }
      j += jstep;
    }
  }
  label_[b] = labelend_[b] = -1;
  childs_[b].clear();
  endps_[b].clear();
  base_[b] = -1;
  bestedges_[b].clear();
  has_bestedges_[b] = 0;
  bestedge_[b] = -1;
  unused_.push_back(b);
}

void Blossom::augment_blossom(int b, int v) {
  int t = v;
  while (parent_[t] != b) t = parent_[t];
  if (t >= n_) augment_blossom(t, v);
  auto& ch = childs_[b];
  auto& ep = endps_[b];
  const int len = static_cast<int>(ch.size());
  auto idx = [&](int k) { return ((k % len) + len) % len; };
  const int i = static_cast<int>(std::find(ch.begin(), ch.end(), t) - ch.begin());
  int j = i, jstep, endptrick;
  if (i & 1) {
    j -= len;
    jstep = 1;
    endptrick = 0;
  } else {
    jstep = -1;
    endptrick = 1;
  }
  while (j != 0) {
    j += jstep;
    t = ch[idx(j)];
    const int p = ep[idx(j - endptrick)] ^ endptrick;
    if (t >= n_) augment_blossom(t, endpoint_[p]);
    j += jstep;
    t = ch[idx(j)];
    if (t >= n_) augment_blossom(t, endpoint_[p ^ 1]);
    mate_[endpoint_[p]] = p ^ 1;
    mate_[endpoint_[p ^ 1]] = p;
  }
  std::rotate(ch.begin(), ch.begin() + i, ch.end());
  std::rotate(ep.begin(), ep.begin() + i, ep.end());
  base_[b] = base_[ch[0]];
}

void Blossom::augment_matching(int k) {
  const int ends[2][2] = {{edges_[k].u, 2 * k + 1}, {edges_[k].v, 2 * k}};
  for (const auto& e : ends) {
    int s = e[0], p = e[1];
    while (true) {
      const int bs = inblossom_[s];
      if (bs >= n_) augment_blossom(bs, s);
      mate_[s] = p;
      if (labelend_[bs] == -1) break;
      const int t = endpoint_[labelend_[bs]];
      const int bt = inblossom_[t];
      s = endpoint_[labelend_[bt]];
      const int j = endpoint_[labelend_[bt] ^ 1];
      if (bt >= n_) augment_blossom(bt, j);
      mate_[j] = labelend_[bt];
      p = labelend_[bt] ^ 1;
    }
  }
}

std::vector<int> Blossom::run() {
  const int m = static_cast<int>(edges_.size());
  if (m == 0) return std::vector<int>(n_, -1);
  I maxw = 0;
  for (const auto& e : edges_) {
    if (e.u < 0 || e.v < 0 || e.u >= n_ || e.v >= n_ || e.u == e.v) throw std::invalid_argument("bad matching edge");
    maxw = std::max(maxw, e.w);
  }
  endpoint_.resize(2 * m);
  neighbend_.assign(n_, {});
  for (int k = 0; k < m; ++k) {
    endpoint_[2 * k] = edges_[k].u;
    endpoint_[2 * k + 1] = edges_[k].v;
    neighbend_[edges_[k].u].push_back(2 * k + 1);
    neighbend_[edges_[k].v].push_back(2 * k);
  }
  mate_.assign(n_, -1);
  label_.assign(2 * n_, 0);
  labelend_.assign(2 * n_, -1);
  inblossom_.resize(n_);
  for (int i = 0; i < n_; ++i) inblossom_[i] = i;
  parent_.assign(2 * n_, -1);
  childs_.assign(2 * n_, {});
  endps_.assign(2 * n_, {});
  base_.assign(2 * n_, -1);
  for (int i = 0; i < n_; ++i) base_[i] = i;
  bestedge_.assign(2 * n_, -1);
  bestedges_.assign(2 * n_, {});
  has_bestedges_.assign(2 * n_, 0);
  unused_.clear();
  for (int i = n_; i < 2 * n_; ++i) unused_.push_back(i);
  dual_.assign(2 * n_, 0);
  for (int i = 0; i < n_; ++i) dual_[i] = maxw;
  allow_.assign(m, 0);

  for (int stage = 0; stage < n_; ++stage) {
    std::fill(label_.begin(), label_.end(), 0);
    std::fill(bestedge_.begin(), bestedge_.end(), -1);
    for (int b = n_; b < 2 * n_; ++b) {
      bestedges_[b].clear();
      has_bestedges_[b] = 0;
    }
    std::fill(allow_.begin(), allow_.end(), 0);
    queue_.clear();
    for (int v = 0; v < n_; ++v)
      if (mate_[v] == -1 && label_[inblossom_[v]] == 0) assign_label(v, 1, -1);
    bool augmented = false;
    while (true) {
      while (!queue_.empty() && !augmented) {
        const int v = queue_.back();
        queue_.pop_back();
        for (int p : neighbend_[v]) {
          const int k = p / 2;
          const int w = endpoint_[p];
          if (inblossom_[v] == inblossom_[w]) continue;
          I kslack = 0;
          if (!allow_[k]) {
            kslack = slack(k);
            if (kslack <= 0) allow_[k] = 1;
          }
          if (allow_[k]) {
            if (label_[inblossom_[w]] == 0) {
              assign_label(w, 2, p ^ 1);
            } else if (label_[inblossom_[w]] == 1) {
              const int base = scan_blossom(v, w);
              if (base >= 0) {
                add_blossom(base, k);
              } else {
                augment_matching(k);
                augmented = true;
                break;
              }
            } else if (label_[w] == 0) {
              label_[w] = 2;
              labelend_[w] = p ^ 1;
            }
          } else if (label_[inblossom_[w]] == 1) {
            const int b = inblossom_[v];
            if (bestedge_[b] == -1 || kslack < slack(bestedge_[b])) bestedge_[b] = k;
          } else if (label_[w] == 0) {
            if (bestedge_[w] == -1 || kslack < slack(bestedge_[w])) bestedge_[w] = k;
          }
        }
      }
      if (augmented) break;

      int dtype = -1, dedge = -1, dblossom = -1;
      I delta = 0;
      if (!maxcard_) {
        dtype = 1;
        delta = *std::min_element(dual_.begin(), dual_.begin() + n_);
      }
      for (int v = 0; v < n_; ++v)
        if (label_[inblossom_[v]] == 0 && bestedge_[v] != -1) {
          const I dd = slack(bestedge_[v]);
          if (dtype == -1 || dd < delta) {
            delta = dd;
            dtype = 2;
            dedge = bestedge_[v];
          }
        }
      for (int b = 0; b < 2 * n_; ++b)
        if (parent_[b] == -1 && label_[b] == 1 && bestedge_[b] != -1) {
          const I ks = slack(bestedge_[b]);
          if (ks % 2 != 0) throw std::logic_error("odd slack between S-blossoms");
          const I dd = ks / 2;
          if (dtype == -1 || dd < delta) {
            delta = dd;
            dtype = 3;
            dedge = bestedge_[b];
          }
        }
      for (int b = n_; b < 2 * n_; ++b)
        if (base_[b] >= 0 && parent_[b] == -1 && label_[b] == 2 && (dtype == -1 || dual_[b] < delta)) {
          delta = dual_[b];
          dtype = 4;
          dblossom = b;
        }
      if (dtype == -1) {
        dtype = 1;
        delta = std::max<I>(0, *std::min_element(dual_.begin(), dual_.begin() + n_));
      }
      for (int v = 0; v < n_; ++v) {
        if (label_[inblossom_[v]] == 1)
          dual_[v] -= delta;
        else if (label_[inblossom_[v]] == 2)
          dual_[v] += delta;
      }
      for (int b = n_; b < 2 * n_; ++b)
        if (base_[b] >= 0 && parent_[b] == -1) {
          if (label_[b] == 1)
            dual_[b] += delta;
          else if (label_[b] == 2)
            dual_[b] -= delta;
        }
      if (dtype == 1) break;
      if (dtype == 2) {
        allow_[dedge] = 1;
        int i = edges_[dedge].u, j = edges_[dedge].v;
        if (label_[inblossom_[i]] == 0) std::swap(i, j);
        queue_.push_back(i);
      } else if (dtype == 3) {
        allow_[dedge] = 1;
        queue_.push_back(edges_[dedge].u);
      } else {
        expand_blossom(dblossom, false);
      }
    }
    if (!augmented) break;
    for (int b = n_; b < 2 * n_; ++b)
      if (parent_[b] == -1 && base_[b] >= 0 && label_[b] == 1 && dual_[b] == 0) expand_blossom(b, true);
  }
  std::vector<int> out(n_, -1);
  for (int v = 0; v < n_; ++v)
    if (mate_[v] >= 0) out[v] = endpoint_[mate_[v]];
  return out;
}

}  // namespace

std::vector<int> max_weight_matching(int num_vertices, const std::vector<WeightedEdge>& edges,
                                     bool max_cardinality) {
  Blossom b(num_vertices, edges, max_cardinality);
  return b.run();
}

}  // namespace predec
