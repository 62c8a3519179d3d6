#pragma once

#include <Eigen/Dense>

namespace mdc {

// Target geometry mode: one-hot rows (original DC) or regular-simplex
// vertex rows (M-DC).
enum class TargetMode { OneHot, Simplex };

// Vertices of the (N-1)-dimensional regular simplex inscribed in the unit
// hypersphere, in ambient N-dimensional coordinates. Row n is vertex x_n.
struct SimplexVertices {
  int n_speakers;
  Eigen::MatrixXd vertices;  // N x N, row-normalized
};

// Builds the N simplex vertices. Row n has ((N-1)/N)*sqrt(N/(N-1)) at
// index n and (-1/N)*sqrt(N/(N-1)) elsewhere. Throws std::invalid_argument
// for n_speakers < 2.
SimplexVertices simplex_vertices(int n_speakers);

// Target cosine between two bins: 1 for the same speaker, -1/(N-1)
// otherwise. Throws for n_speakers < 2.
double target_cosine(int n_speakers, bool same_speaker);

// Max over vertex rows of the infinity-norm distance between the simplex
// row and the matching one-hot row. Strictly decreasing in N, tends to 0.
double limit_deviation(int n_speakers);

}  // namespace mdc
