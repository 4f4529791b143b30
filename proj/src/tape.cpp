#include "nrn/tape.hpp"

#include <cmath>
#include <stdexcept>

#include "nrn/kernels.hpp"

namespace nrn {

namespace {
const kernels::Backend& K() { return kernels::active(); }
}

VarId Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<VarId>(nodes_.size() - 1);
}

std::vector<double>& Tape::grad_of(VarId id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.val.size(), 0.0);
    return n.grad;
}

void Tape::check_same_size(VarId a, VarId b) const {
    if (nodes_[a].val.size() != nodes_[b].val.size())
        throw std::invalid_argument("tape operands differ in size");
}

double Tape::scalar(VarId id) const {
    if (nodes_[id].val.size() != 1) throw std::invalid_argument("node is not a scalar");
    return nodes_[id].val[0];
}

VarId Tape::constant(std::vector<double> v) {
    Node n;
    n.op = Op::Const;
    n.val = std::move(v);
    return push(std::move(n));
}

VarId Tape::param_row(Tensor& t, int row) {
    if (row < 0 || row >= t.rows) throw std::out_of_range("row out of range in " + t.name);
    Node n;
    n.op = Op::ParamRow;
    n.t = &t;
    n.i0 = row;
    n.val.assign(t.row_ptr(row), t.row_ptr(row) + t.cols);
    return push(std::move(n));
}

VarId Tape::param(Tensor& t) {
    Node n;
    n.op = Op::ParamAll;
    n.t = &t;
    n.val = t.data;
    return push(std::move(n));
}

VarId Tape::matvec(Tensor& w, VarId x) {
    if (static_cast<std::size_t>(w.cols) != dim(x))
        throw std::invalid_argument("matvec shape mismatch in " + w.name);
    Node n;
    n.op = Op::MatVec;
    n.t = &w;
    n.a = x;
    n.val.resize(w.rows);
    K().matvec(w.data.data(), w.rows, w.cols, nodes_[x].val.data(), n.val.data());
    return push(std::move(n));
}

VarId Tape::add(VarId a, VarId b) {
    check_same_size(a, b);
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    n.val.resize(dim(a));
    K().add(nodes_[a].val.data(), nodes_[b].val.data(), n.val.data(), n.val.size());
    return push(std::move(n));
}

VarId Tape::sub(VarId a, VarId b) {
    check_same_size(a, b);
    Node n;
    n.op = Op::Sub;
    n.a = a;
    n.b = b;
    n.val.resize(dim(a));
    K().sub(nodes_[a].val.data(), nodes_[b].val.data(), n.val.data(), n.val.size());
    return push(std::move(n));
}

VarId Tape::mul(VarId a, VarId b) {
    check_same_size(a, b);
    Node n;
    n.op = Op::Mul;
    n.a = a;
    n.b = b;
    n.val.resize(dim(a));
    K().mul(nodes_[a].val.data(), nodes_[b].val.data(), n.val.data(), n.val.size());
    return push(std::move(n));
}

VarId Tape::affine(VarId a, double scale, double shift) {
    Node n;
    n.op = Op::Affine;
    n.a = a;
    n.c0 = scale;
    n.c1 = shift;
    n.val.resize(dim(a));
    K().affine(scale, shift, nodes_[a].val.data(), n.val.data(), n.val.size());
    return push(std::move(n));
}

VarId Tape::sigmoid(VarId a) {
    Node n;
    n.op = Op::Sigmoid;
    n.a = a;
    n.val.resize(dim(a));
    for (std::size_t i = 0; i < n.val.size(); ++i)
        n.val[i] = 1.0 / (1.0 + std::exp(-nodes_[a].val[i]));
    return push(std::move(n));
}

VarId Tape::tanh_(VarId a) {
    Node n;
    n.op = Op::Tanh;
    n.a = a;
    n.val.resize(dim(a));
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = std::tanh(nodes_[a].val[i]);
    return push(std::move(n));
}

VarId Tape::relu(VarId a) {
    Node n;
    n.op = Op::Relu;
    n.a = a;
    n.val.resize(dim(a));
    for (std::size_t i = 0; i < n.val.size(); ++i)
        n.val[i] = nodes_[a].val[i] > 0.0 ? nodes_[a].val[i] : 0.0;
    return push(std::move(n));
}

VarId Tape::exp_(VarId a) {
    Node n;
    n.op = Op::Exp;
    n.a = a;
    n.val.resize(dim(a));
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = std::exp(nodes_[a].val[i]);
    return push(std::move(n));
}

VarId Tape::softmax(VarId a) {
    Node n;
    n.op = Op::Softmax;
    n.a = a;
    const auto& x = nodes_[a].val;
    n.val.resize(x.size());
    double m = K().max(x.data(), x.size());
    double z = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        n.val[i] = std::exp(x[i] - m);
        z += n.val[i];
    }
    for (auto& v : n.val) v /= z;
    return push(std::move(n));
}

VarId Tape::dot(VarId a, VarId b) {
    check_same_size(a, b);
    Node n;
    n.op = Op::Dot;
    n.a = a;
    n.b = b;
    n.val = {K().dot(nodes_[a].val.data(), nodes_[b].val.data(), dim(a))};
    return push(std::move(n));
}

VarId Tape::sum(VarId a) {
    Node n;
    n.op = Op::Sum;
    n.a = a;
    n.val = {K().sum(nodes_[a].val.data(), dim(a))};
    return push(std::move(n));
}

VarId Tape::logsumexp(VarId a) {
    Node n;
    n.op = Op::LogSumExp;
    n.a = a;
    const auto& x = nodes_[a].val;
    double m = K().max(x.data(), x.size());
    double z = 0.0;
    for (double v : x) z += std::exp(v - m);
    n.val = {m + std::log(z)};
    return push(std::move(n));
}

VarId Tape::pick(VarId a, int i) {
    if (i < 0 || static_cast<std::size_t>(i) >= dim(a))
        throw std::out_of_range("pick index out of range");
    Node n;
    n.op = Op::Pick;
    n.a = a;
    n.i0 = i;
    n.val = {nodes_[a].val[i]};
    return push(std::move(n));
}

VarId Tape::concat(VarId a, VarId b) {
    Node n;
    n.op = Op::Concat;
    n.a = a;
    n.b = b;
    n.val = nodes_[a].val;
    n.val.insert(n.val.end(), nodes_[b].val.begin(), nodes_[b].val.end());
    return push(std::move(n));
}

VarId Tape::slice(VarId a, int offset, int len) {
    if (offset < 0 || len < 0 || static_cast<std::size_t>(offset + len) > dim(a))
        throw std::out_of_range("slice out of range");
    Node n;
    n.op = Op::Slice;
    n.a = a;
    n.i0 = offset;
    n.i1 = len;
    n.val.assign(nodes_[a].val.begin() + offset, nodes_[a].val.begin() + offset + len);
    return push(std::move(n));
}

VarId Tape::scale_by(VarId a, VarId s) {
    if (dim(s) != 1) throw std::invalid_argument("scale_by needs a scalar");
    Node n;
    n.op = Op::ScaleBy;
    n.a = a;
    n.b = s;
    n.val.resize(dim(a));
    K().affine(nodes_[s].val[0], 0.0, nodes_[a].val.data(), n.val.data(), n.val.size());
    return push(std::move(n));
}

void Tape::backward(VarId root) {
    if (nodes_[root].val.size() != 1)
        throw std::invalid_argument("backward root must be a scalar");
    grad_of(root)[0] = 1.0;

    for (VarId id = root; id >= 0; --id) {
        Node& n = nodes_[id];
        if (n.grad.empty()) continue;  // does not influence the root
        const double* g = n.grad.data();
        std::size_t sz = n.val.size();
        switch (n.op) {
            case Op::Const: break;
            case Op::ParamRow:
                K().axpy(1.0, g, n.t->grad_row_ptr(n.i0), sz);
                break;
            case Op::ParamAll:
                K().axpy(1.0, g, n.t->grad.data(), sz);
                break;
            case Op::MatVec: {
                // dW += g x^T ; dx += W^T g
                K().ger_acc(n.t->grad.data(), n.t->rows, n.t->cols, g,
                            nodes_[n.a].val.data());
                K().matvec_t_acc(n.t->data.data(), n.t->rows, n.t->cols, g,
                                 grad_of(n.a).data());
                break;
            }
            case Op::Add:
                K().axpy(1.0, g, grad_of(n.a).data(), sz);
                K().axpy(1.0, g, grad_of(n.b).data(), sz);
                break;
            case Op::Sub:
                K().axpy(1.0, g, grad_of(n.a).data(), sz);
                K().axpy(-1.0, g, grad_of(n.b).data(), sz);
                break;
            case Op::Mul: {
                auto& ga = grad_of(n.a);
                auto& gb = grad_of(n.b);
                const auto& av = nodes_[n.a].val;
                const auto& bv = nodes_[n.b].val;
                for (std::size_t i = 0; i < sz; ++i) {
                    ga[i] += g[i] * bv[i];
                    gb[i] += g[i] * av[i];
                }
                break;
            }
            case Op::Affine:
                K().axpy(n.c0, g, grad_of(n.a).data(), sz);
                break;
            case Op::Sigmoid: {
                auto& ga = grad_of(n.a);
                for (std::size_t i = 0; i < sz; ++i)
                    ga[i] += g[i] * n.val[i] * (1.0 - n.val[i]);
                break;
            }
            case Op::Tanh: {
                auto& ga = grad_of(n.a);
                for (std::size_t i = 0; i < sz; ++i)
                    ga[i] += g[i] * (1.0 - n.val[i] * n.val[i]);
                break;
            }
            case Op::Relu: {
                auto& ga = grad_of(n.a);
                const auto& av = nodes_[n.a].val;
                for (std::size_t i = 0; i < sz; ++i)
                    if (av[i] > 0.0) ga[i] += g[i];
                break;
            }
            case Op::Exp: {
                auto& ga = grad_of(n.a);
                for (std::size_t i = 0; i < sz; ++i) ga[i] += g[i] * n.val[i];
                break;
            }
            case Op::Softmax: {
                auto& ga = grad_of(n.a);
                double gy = K().dot(g, n.val.data(), sz);
                for (std::size_t i = 0; i < sz; ++i) ga[i] += n.val[i] * (g[i] - gy);
                break;
            }
            case Op::Dot: {
                K().axpy(g[0], nodes_[n.b].val.data(), grad_of(n.a).data(), dim(n.a));
                K().axpy(g[0], nodes_[n.a].val.data(), grad_of(n.b).data(), dim(n.a));
                break;
            }
            case Op::Sum: {
                auto& ga = grad_of(n.a);
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
                break;
            }
            case Op::LogSumExp: {
                auto& ga = grad_of(n.a);
                const auto& av = nodes_[n.a].val;
                for (std::size_t i = 0; i < ga.size(); ++i)
                    ga[i] += g[0] * std::exp(av[i] - n.val[0]);
                break;
            }
            case Op::Pick:
                grad_of(n.a)[n.i0] += g[0];
                break;
            case Op::Concat: {
                std::size_t na = dim(n.a);
                K().axpy(1.0, g, grad_of(n.a).data(), na);
                K().axpy(1.0, g + na, grad_of(n.b).data(), dim(n.b));
                break;
            }
            case Op::Slice:
                K().axpy(1.0, g, grad_of(n.a).data() + n.i0, n.i1);
                break;
            case Op::ScaleBy: {
                K().axpy(nodes_[n.b].val[0], g, grad_of(n.a).data(), sz);
                grad_of(n.b)[0] += K().dot(g, nodes_[n.a].val.data(), sz);
                break;
            }
        }
    }
}

}  // namespace nrn
