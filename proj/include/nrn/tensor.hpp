#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace nrn {

// Named dense parameter (matrix or vector) with a gradient buffer.
struct Tensor {
    std::string name;
    int rows = 0, cols = 1;
    std::vector<double> data;
    std::vector<double> grad;

    std::size_t size() const { return data.size(); }
    double* row_ptr(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
    const double* row_ptr(int r) const {
        return data.data() + static_cast<std::size_t>(r) * cols;
    }
    double* grad_row_ptr(int r) { return grad.data() + static_cast<std::size_t>(r) * cols; }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

// Registry covering every trainable tensor exactly once, in a stable order.
class ParamStore {
public:
    Tensor& add(const std::string& name, int rows, int cols = 1);
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) > 0; }

    const std::vector<std::unique_ptr<Tensor>>& all() const { return tensors_; }
    std::vector<std::unique_ptr<Tensor>>& all() { return tensors_; }

    void zero_grad();
    std::size_t total_size() const;

private:
    std::vector<std::unique_ptr<Tensor>> tensors_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace nrn
