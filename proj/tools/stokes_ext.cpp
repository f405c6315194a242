#include <iostream>

#include "stokesext/stokesext.hpp"

int main() {
    const auto mesh = stokesext::build_structured_mesh(4);
    std::cout << "placeholder " << mesh.n_nodes() << "\n";
    return 0;
}
