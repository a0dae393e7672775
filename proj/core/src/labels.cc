#include "ealearn/labels.h"

namespace ealearn {

NodeSet::NodeSet(std::size_t num_left, std::size_t num_right)
    : member_{std::vector<char>(num_left, 0), std::vector<char>(num_right, 0)} {}

bool NodeSet::contains(NodeRef n) const {
  const auto& m = member_[side_index(n.side)];
  return n.index < m.size() && m[n.index] != 0;
}

bool NodeSet::insert(NodeRef n) {
  char& slot = member_[side_index(n.side)].at(n.index);
  if (slot) return false;
  slot = 1;
  ++size_;
  return true;
}

bool NodeSet::erase(NodeRef n) {
  auto& m = member_[side_index(n.side)];
  if (n.index >= m.size() || !m[n.index]) return false;
  m[n.index] = 0;
  --size_;
  return true;
}

std::vector<NodeRef> NodeSet::to_vector() const {
  std::vector<NodeRef> out;
  out.reserve(size_);
  for (Side s : {Side::kLeft, Side::kRight}) {
    const auto& m = member_[side_index(s)];
    for (EntityId e = 0; e < m.size(); ++e) {
      if (m[e]) out.push_back({s, e});
    }
  }
  return out;
}

}  // namespace ealearn
