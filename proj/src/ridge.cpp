/*
 * cephalo: Region-specialized facial landmark detection
 * File: src/ridge.cpp
 *
 * Copyright 2026 The cephalo authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "cephalo/error.hpp"
#include "cephalo/regressors.hpp"

namespace cephalo::regressors {

Eigen::MatrixXd solve_ridge(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double lambda)
{
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    if (Y.rows() != n) {
        throw Error("ridge: feature and target row counts differ");
    }
    if (!(lambda >= 0.0)) {
        throw Error("ridge: lambda must be non-negative");
    }
    if (lambda == 0.0 && d > n) {
        throw Error("ridge: " + std::to_string(d) + " features exceed " + std::to_string(n) +
                    " samples; the problem is ill-posed without regularization (use lambda > 0)");
    }

    Eigen::MatrixXd Rt;
    if (d <= n) {
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
        gram.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
        gram.diagonal().array() += lambda;
        const Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(gram);
        if (llt.info() != Eigen::Success) {
            throw Error("ridge: normal equations are not positive definite");
        }
        Rt = llt.solve(X.transpose() * Y);
    } else {
        Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(n, n);
        kernel.selfadjointView<Eigen::Lower>().rankUpdate(X);
        kernel.diagonal().array() += lambda;
        const Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(kernel);
        if (llt.info() != Eigen::Success) {
            throw Error("ridge: dual system is not positive definite");
        }
        Rt = X.transpose() * llt.solve(Y);
    }
    if (!Rt.allFinite()) {
        throw Error("ridge: solve produced non-finite values");
    }
    return Rt.transpose();
}

} // namespace cephalo::regressors
