//
// Copyright 2026 The mia-bench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef MIA_CORE_HPP
#define MIA_CORE_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mia {

template <typename Scalar> using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar> using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar> using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using RowVector = RowVectorX<double>;
using Index = Eigen::Index;

// Index of a record in the dataset it was loaded or generated into. Membership
// is tracked by this identity, never by feature-value equality.
using RecordId = std::int64_t;

// Precondition violated by the caller (shapes, sizes, ranges).
class DomainError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

// A computation produced a NaN or infinity.
class NumericError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. Carries the 1-based line number when known.
class ParseError : public std::runtime_error
{
public:
  ParseError(std::string const &msg, long line = 0)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), line_(line)
  {
  }
  long line() const { return line_; }

private:
  long line_;
};

using Rng = std::mt19937_64;

inline void require(bool cond, std::string const &msg)
{
  if (!cond) { throw DomainError(msg); }
}

} // namespace mia

#endif // MIA_CORE_HPP
