#include "nrn/tensor.hpp"

namespace nrn {

Tensor& ParamStore::add(const std::string& name, int rows, int cols) {
    if (contains(name)) throw std::logic_error("duplicate tensor name: " + name);
    auto t = std::make_unique<Tensor>();
    t->name = name;
    t->rows = rows;
    t->cols = cols;
    t->data.assign(static_cast<std::size_t>(rows) * cols, 0.0);
    t->grad.assign(t->data.size(), 0.0);
    index_.emplace(name, tensors_.size());
    tensors_.push_back(std::move(t));
    return *tensors_.back();
}

Tensor& ParamStore::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no tensor named " + name);
    return *tensors_[it->second];
}

const Tensor& ParamStore::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no tensor named " + name);
    return *tensors_[it->second];
}

void ParamStore::zero_grad() {
    for (auto& t : tensors_) t->zero_grad();
}

std::size_t ParamStore::total_size() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t->size();
    return n;
}

}  // namespace nrn
