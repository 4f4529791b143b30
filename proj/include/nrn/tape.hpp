#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nrn/tensor.hpp"

namespace nrn {

using VarId = std::int32_t;

// Reverse-mode tape over vector-valued nodes. Nodes are appended in
// evaluation order (children before parents), so backward() is a single
// reverse sweep. Parameter leaves accumulate into Tensor::grad; the tape
// itself is scoped to one forward/backward pass and then cleared.
class Tape {
public:
    VarId constant(std::vector<double> v);
    VarId param_row(Tensor& t, int row);
    VarId param(Tensor& t);  // the whole tensor, flattened

    VarId matvec(Tensor& w, VarId x);  // w is rows x cols, x has cols entries
    VarId add(VarId a, VarId b);
    VarId sub(VarId a, VarId b);
    VarId mul(VarId a, VarId b);                   // elementwise
    VarId affine(VarId a, double scale, double shift);  // scale*a + shift
    VarId sigmoid(VarId a);
    VarId tanh_(VarId a);
    VarId relu(VarId a);
    VarId exp_(VarId a);
    VarId softmax(VarId a);
    VarId dot(VarId a, VarId b);      // -> size 1
    VarId sum(VarId a);               // -> size 1
    VarId logsumexp(VarId a);         // -> size 1, numerically stable
    VarId pick(VarId a, int i);       // -> size 1
    VarId concat(VarId a, VarId b);
    VarId slice(VarId a, int offset, int len);
    VarId scale_by(VarId a, VarId s);  // s has size 1

    const std::vector<double>& val(VarId id) const { return nodes_[id].val; }
    std::size_t dim(VarId id) const { return nodes_[id].val.size(); }
    double scalar(VarId id) const;

    // Seeds d(root)=1 and accumulates into every reachable node and every
    // touched parameter tensor's grad buffer. root must have size 1.
    void backward(VarId root);

    void clear() { nodes_.clear(); }
    std::size_t node_count() const { return nodes_.size(); }

private:
    enum class Op : std::uint8_t {
        Const, ParamRow, ParamAll, MatVec, Add, Sub, Mul, Affine, Sigmoid, Tanh,
        Relu, Exp, Softmax, Dot, Sum, LogSumExp, Pick, Concat, Slice, ScaleBy,
    };

    struct Node {
        Op op;
        VarId a = -1, b = -1;
        Tensor* t = nullptr;
        int i0 = 0, i1 = 0;
        double c0 = 0.0, c1 = 0.0;
        std::vector<double> val;
        std::vector<double> grad;
    };

    std::vector<Node> nodes_;

    VarId push(Node n);
    std::vector<double>& grad_of(VarId id);
    void check_same_size(VarId a, VarId b) const;
};

}  // namespace nrn
