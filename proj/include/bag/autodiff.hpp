#pragma once

// Reverse-mode automatic differentiation over dense double matrices.
// A Tape owns every intermediate value of one forward pass; backward()
// walks the tape in reverse and accumulates gradients into every node.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bag::ad {

using Mat = Eigen::MatrixXd;

struct Var {
    int idx = -1;
    bool valid() const { return idx >= 0; }
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    const Mat& val(Var v) const { return nodes_[check(v)].value; }
    const Mat& grad(Var v) const { return nodes_[check(v)].grad; }
    std::size_t size() const { return nodes_.size(); }

    Var leaf(Mat value) {
        return push(std::move(value), nullptr);
    }

    Var matmul(Var a, Var b) {
        require(val(a).cols() == val(b).rows(), "matmul: inner dimension mismatch");
        Mat v = val(a) * val(b);
        return push(std::move(v), [this, a, b](const Mat& g) {
            nodes_[a.idx].grad.noalias() += g * nodes_[b.idx].value.transpose();
            nodes_[b.idx].grad.noalias() += nodes_[a.idx].value.transpose() * g;
        });
    }

    Var add(Var a, Var b) {
        require_same_shape(a, b, "add");
        Mat v = val(a) + val(b);
        return push(std::move(v), [this, a, b](const Mat& g) {
            nodes_[a.idx].grad += g;
            nodes_[b.idx].grad += g;
        });
    }

    Var sub(Var a, Var b) {
        require_same_shape(a, b, "sub");
        Mat v = val(a) - val(b);
        return push(std::move(v), [this, a, b](const Mat& g) {
            nodes_[a.idx].grad += g;
            nodes_[b.idx].grad -= g;
        });
    }

    Var scale(Var a, double s) {
        Mat v = val(a) * s;
        return push(std::move(v), [this, a, s](const Mat& g) {
            nodes_[a.idx].grad += g * s;
        });
    }

    Var cwise_mul(Var a, Var b) {
        require_same_shape(a, b, "cwise_mul");
        Mat v = val(a).cwiseProduct(val(b));
        return push(std::move(v), [this, a, b](const Mat& g) {
            nodes_[a.idx].grad += g.cwiseProduct(nodes_[b.idx].value);
            nodes_[b.idx].grad += g.cwiseProduct(nodes_[a.idx].value);
        });
    }

    Var tanh_(Var a) {
        Mat v = val(a).array().tanh().matrix();
        Var out = push(std::move(v), nullptr);
        nodes_[out.idx].backward = [this, a, out](const Mat& g) {
            const Mat& y = nodes_[out.idx].value;
            nodes_[a.idx].grad += g.cwiseProduct((1.0 - y.array().square()).matrix());
        };
        return out;
    }

    Var sigmoid_(Var a) {
        Mat v = (1.0 / (1.0 + (-val(a).array()).exp())).matrix();
        Var out = push(std::move(v), nullptr);
        nodes_[out.idx].backward = [this, a, out](const Mat& g) {
            const Mat& y = nodes_[out.idx].value;
            nodes_[a.idx].grad += g.cwiseProduct((y.array() * (1.0 - y.array())).matrix());
        };
        return out;
    }

    Var log_(Var a) {
        Mat v = val(a).array().log().matrix();
        return push(std::move(v), [this, a](const Mat& g) {
            nodes_[a.idx].grad += g.cwiseQuotient(nodes_[a.idx].value);
        });
    }

    Var one_minus(Var a) {
        Mat v = (1.0 - val(a).array()).matrix();
        return push(std::move(v), [this, a](const Mat& g) {
            nodes_[a.idx].grad -= g;
        });
    }

    Var transpose(Var a) {
        Mat v = val(a).transpose();
        return push(std::move(v), [this, a](const Mat& g) {
            nodes_[a.idx].grad += g.transpose();
        });
    }

    // Concatenate blocks left-to-right; every block must have the same row count.
    Var concat_cols(const std::vector<Var>& parts) {
        require(!parts.empty(), "concat_cols: empty");
        Eigen::Index rows = val(parts[0]).rows(), cols = 0;
        for (Var p : parts) {
            require(val(p).rows() == rows, "concat_cols: row mismatch");
            cols += val(p).cols();
        }
        Mat v(rows, cols);
        Eigen::Index off = 0;
        for (Var p : parts) {
            v.middleCols(off, val(p).cols()) = val(p);
            off += val(p).cols();
        }
        return push(std::move(v), [this, parts](const Mat& g) {
            Eigen::Index off2 = 0;
            for (Var p : parts) {
                Eigen::Index w = nodes_[p.idx].value.cols();
                nodes_[p.idx].grad += g.middleCols(off2, w);
                off2 += w;
            }
        });
    }

    // Stack row blocks top-to-bottom; same column count everywhere.
    Var concat_rows(const std::vector<Var>& parts) {
        require(!parts.empty(), "concat_rows: empty");
        Eigen::Index cols = val(parts[0]).cols(), rows = 0;
        for (Var p : parts) {
            require(val(p).cols() == cols, "concat_rows: column mismatch");
            rows += val(p).rows();
        }
        Mat v(rows, cols);
        Eigen::Index off = 0;
        for (Var p : parts) {
            v.middleRows(off, val(p).rows()) = val(p);
            off += val(p).rows();
        }
        return push(std::move(v), [this, parts](const Mat& g) {
            Eigen::Index off2 = 0;
            for (Var p : parts) {
                Eigen::Index h = nodes_[p.idx].value.rows();
                nodes_[p.idx].grad += g.middleRows(off2, h);
                off2 += h;
            }
        });
    }

    Var cols(Var a, Eigen::Index off, Eigen::Index n) {
        require(off >= 0 && n >= 1 && off + n <= val(a).cols(), "cols: range");
        Mat v = val(a).middleCols(off, n);
        return push(std::move(v), [this, a, off, n](const Mat& g) {
            nodes_[a.idx].grad.middleCols(off, n) += g;
        });
    }

    Var row(Var a, Eigen::Index i) {
        require(i >= 0 && i < val(a).rows(), "row: index out of range");
        Mat v = val(a).row(i);
        return push(std::move(v), [this, a, i](const Mat& g) {
            nodes_[a.idx].grad.row(i) += g;
        });
    }

    Var entry(Var a, Eigen::Index i, Eigen::Index j) {
        require(i >= 0 && i < val(a).rows() && j >= 0 && j < val(a).cols(),
                "entry: index out of range");
        Mat v(1, 1);
        v(0, 0) = val(a)(i, j);
        return push(std::move(v), [this, a, i, j](const Mat& g) {
            nodes_[a.idx].grad(i, j) += g(0, 0);
        });
    }

    // Gather rows of a table by index; duplicate indices scatter-add on backward.
    Var gather_rows(Var table, std::vector<int> indices) {
        Mat v(static_cast<Eigen::Index>(indices.size()), val(table).cols());
        for (std::size_t i = 0; i < indices.size(); ++i) {
            require(indices[i] >= 0 && indices[i] < val(table).rows(),
                    "gather_rows: index out of range");
            v.row(static_cast<Eigen::Index>(i)) = val(table).row(indices[i]);
        }
        return push(std::move(v), [this, table, indices = std::move(indices)](const Mat& g) {
            for (std::size_t i = 0; i < indices.size(); ++i)
                nodes_[table.idx].grad.row(indices[i]) += g.row(static_cast<Eigen::Index>(i));
        });
    }

    // Broadcast a 1 x n row vector onto every row of a.
    Var add_rowvec(Var a, Var b) {
        require(val(b).rows() == 1 && val(b).cols() == val(a).cols(), "add_rowvec: shape");
        Mat v = val(a).rowwise() + val(b).row(0);
        return push(std::move(v), [this, a, b](const Mat& g) {
            nodes_[a.idx].grad += g;
            nodes_[b.idx].grad += g.colwise().sum();
        });
    }

    // Broadcast a 1 x 1 scalar onto every entry of a.
    Var add_scalar(Var a, Var s) {
        require(val(s).rows() == 1 && val(s).cols() == 1, "add_scalar: scalar expected");
        Mat v = (val(a).array() + val(s)(0, 0)).matrix();
        return push(std::move(v), [this, a, s](const Mat& g) {
            nodes_[a.idx].grad += g;
            nodes_[s.idx].grad(0, 0) += g.sum();
        });
    }

    Var tile_rows(Var a, Eigen::Index times) {
        require(val(a).rows() == 1, "tile_rows: row vector expected");
        Mat v = val(a).replicate(times, 1);
        return push(std::move(v), [this, a](const Mat& g) {
            nodes_[a.idx].grad += g.colwise().sum();
        });
    }

    Var tile_cols(Var a, Eigen::Index times) {
        require(val(a).cols() == 1, "tile_cols: column vector expected");
        Mat v = val(a).replicate(1, times);
        return push(std::move(v), [this, a](const Mat& g) {
            nodes_[a.idx].grad += g.rowwise().sum();
        });
    }

    Var rowwise_mean(Var a) {
        Mat v = val(a).rowwise().mean();
        double inv = 1.0 / static_cast<double>(val(a).cols());
        return push(std::move(v), [this, a, inv](const Mat& g) {
            nodes_[a.idx].grad += (g * inv).replicate(1, nodes_[a.idx].value.cols());
        });
    }

    // Row-wise maximum; gradient flows to the first arg-max entry per row.
    Var rowwise_max(Var a) {
        Eigen::Index r = val(a).rows();
        Mat v(r, 1);
        std::vector<Eigen::Index> arg(static_cast<std::size_t>(r));
        for (Eigen::Index i = 0; i < r; ++i) {
            Eigen::Index j;
            v(i, 0) = val(a).row(i).maxCoeff(&j);
            arg[static_cast<std::size_t>(i)] = j;
        }
        return push(std::move(v), [this, a, arg = std::move(arg)](const Mat& g) {
            for (Eigen::Index i = 0; i < g.rows(); ++i)
                nodes_[a.idx].grad(i, arg[static_cast<std::size_t>(i)]) += g(i, 0);
        });
    }

    // Numerically stable softmax over each row.
    Var softmax_rows(Var a) {
        Mat v = val(a);
        for (Eigen::Index i = 0; i < v.rows(); ++i) {
            Eigen::ArrayXd r = v.row(i).array();
            r = (r - r.maxCoeff()).exp();
            v.row(i) = (r / r.sum()).matrix();
        }
        Var out = push(std::move(v), nullptr);
        nodes_[out.idx].backward = [this, a, out](const Mat& g) {
            const Mat& p = nodes_[out.idx].value;
            for (Eigen::Index i = 0; i < p.rows(); ++i) {
                double dot = p.row(i).cwiseProduct(g.row(i)).sum();
                nodes_[a.idx].grad.row(i) +=
                    p.row(i).cwiseProduct((g.row(i).array() - dot).matrix());
            }
        };
        return out;
    }

    // Softmax over the entries of a column vector, restricted to entries whose
    // mask flag is false. Masked entries get probability exactly 0.
    Var masked_softmax_col(Var a, const std::vector<char>& masked) {
        require(val(a).cols() == 1, "masked_softmax_col: column vector expected");
        require(static_cast<Eigen::Index>(masked.size()) == val(a).rows(),
                "masked_softmax_col: mask length");
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < val(a).rows(); ++i)
            if (!masked[static_cast<std::size_t>(i)]) mx = std::max(mx, val(a)(i, 0));
        require(std::isfinite(mx), "masked_softmax_col: all entries masked");
        Mat v = Mat::Zero(val(a).rows(), 1);
        double sum = 0.0;
        for (Eigen::Index i = 0; i < v.rows(); ++i)
            if (!masked[static_cast<std::size_t>(i)]) {
                v(i, 0) = std::exp(val(a)(i, 0) - mx);
                sum += v(i, 0);
            }
        v /= sum;
        Var out = push(std::move(v), nullptr);
        nodes_[out.idx].backward = [this, a, out, masked](const Mat& g) {
            const Mat& p = nodes_[out.idx].value;
            double dot = 0.0;
            for (Eigen::Index i = 0; i < p.rows(); ++i)
                if (!masked[static_cast<std::size_t>(i)]) dot += p(i, 0) * g(i, 0);
            for (Eigen::Index i = 0; i < p.rows(); ++i)
                if (!masked[static_cast<std::size_t>(i)])
                    nodes_[a.idx].grad(i, 0) += p(i, 0) * (g(i, 0) - dot);
        };
        return out;
    }

    void backward(Var out) {
        require(val(out).rows() == 1 && val(out).cols() == 1,
                "backward: scalar output expected");
        for (int i = 0; i <= out.idx; ++i)
            nodes_[static_cast<std::size_t>(i)].grad =
                Mat::Zero(nodes_[static_cast<std::size_t>(i)].value.rows(),
                          nodes_[static_cast<std::size_t>(i)].value.cols());
        nodes_[static_cast<std::size_t>(out.idx)].grad(0, 0) = 1.0;
        for (int i = out.idx; i >= 0; --i) {
            auto& n = nodes_[static_cast<std::size_t>(i)];
            if (n.backward) n.backward(n.grad);
        }
    }

private:
    struct Node {
        Mat value;
        Mat grad;
        std::function<void(const Mat&)> backward;
    };

    int check(Var v) const {
        require(v.valid() && v.idx < static_cast<int>(nodes_.size()), "invalid Var");
        return v.idx;
    }

    Var push(Mat value, std::function<void(const Mat&)> backward) {
        nodes_.push_back(Node{std::move(value), Mat(), std::move(backward)});
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    static void require(bool cond, const char* msg) {
        if (!cond) throw std::invalid_argument(std::string("tape: ") + msg);
    }

    void require_same_shape(Var a, Var b, const char* op) const {
        require(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(),
                op);
    }

    std::vector<Node> nodes_;
};

}  // namespace bag::ad
