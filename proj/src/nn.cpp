#include "eegdm/nn.hpp"

namespace eegdm {

Mat xavier_uniform(int rows, int cols, Rng& rng) {
    double limit = std::sqrt(6.0 / double(rows + cols));
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-limit, limit);
    return m;
}

}  // namespace eegdm
