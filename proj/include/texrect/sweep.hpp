#pragma once

#include "texrect/image.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace texrect {

// Ablation grid over (P1,P2) or (S1,S2), e.g. "S:50,20,10,0x10,5".
struct SweepSpec {
    char axis = 'S';  // 'P' or 'S'
    std::vector<int> first;
    std::vector<int> second;
};

inline SweepSpec parse_sweep_spec(const std::string& s) {
    size_t colon = s.find(':');
    require(colon == 1 && (s[0] == 'P' || s[0] == 'p' || s[0] == 'S' || s[0] == 's'),
            "sweep: expected 'P:<list>x<list>' or 'S:<list>x<list>', got '" + s + "'");
    size_t cross = s.find('x', colon);
    require(cross != std::string::npos, "sweep: missing 'x' between the two value lists in '" +
                                            s + "'");
    SweepSpec spec;
    spec.axis = static_cast<char>(std::toupper(s[0]));
    auto parse_list = [&s](const std::string& part) {
        std::vector<int> out;
        std::string item;
        std::stringstream ss(part);
        while (std::getline(ss, item, ',')) {
            if (item.empty()) continue;
            try {
                out.push_back(std::stoi(item));
            } catch (...) {
                fail("sweep: cannot parse value '" + item + "' in '" + s + "'");
            }
        }
        require(!out.empty(), "sweep: empty value list in '" + s + "'");
        return out;
    };
    spec.first = parse_list(s.substr(colon + 1, cross - colon - 1));
    spec.second = parse_list(s.substr(cross + 1));
    return spec;
}

namespace glyphs {

using Glyph = std::array<const char*, 7>;

inline const Glyph* lookup(char c) {
    static const std::map<char, Glyph> table = {
        {'0', {" ### ", "#   #", "#  ##", "# # #", "##  #", "#   #", " ### "}},
        {'1', {"  #  ", " ##  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "}},
        {'2', {" ### ", "#   #", "    #", "   # ", "  #  ", " #   ", "#####"}},
        {'3', {" ### ", "#   #", "    #", "  ## ", "    #", "#   #", " ### "}},
        {'4', {"   # ", "  ## ", " # # ", "#  # ", "#####", "   # ", "   # "}},
        {'5', {"#####", "#    ", "#### ", "    #", "    #", "#   #", " ### "}},
        {'6', {" ### ", "#    ", "#    ", "#### ", "#   #", "#   #", " ### "}},
        {'7', {"#####", "    #", "   # ", "  #  ", "  #  ", "  #  ", "  #  "}},
        {'8', {" ### ", "#   #", "#   #", " ### ", "#   #", "#   #", " ### "}},
        {'9', {" ### ", "#   #", "#   #", " ####", "    #", "    #", " ### "}},
        {'P', {"#### ", "#   #", "#   #", "#### ", "#    ", "#    ", "#    "}},
        {'S', {" ####", "#    ", "#    ", " ### ", "    #", "    #", "#### "}},
        {'=', {"     ", "     ", "#####", "     ", "#####", "     ", "     "}},
        {'-', {"     ", "     ", "     ", "#####", "     ", "     ", "     "}},
        {' ', {"     ", "     ", "     ", "     ", "     ", "     ", "     "}},
    };
    auto it = table.find(c);
    return it == table.end() ? nullptr : &it->second;
}

inline void draw_text(PixelImage& img, int y, int x, const std::string& text, float r, float g,
                      float b) {
    for (char c : text) {
        const Glyph* glyph = lookup(c);
        if (glyph != nullptr) {
            for (int gy = 0; gy < 7; ++gy) {
                for (int gx = 0; gx < 5; ++gx) {
                    if ((*glyph)[gy][gx] != '#') continue;
                    int py = y + gy;
                    int px = x + gx;
                    if (py < 0 || py >= img.h || px < 0 || px >= img.w) continue;
                    img.at(py, px, 0) = r;
                    img.at(py, px, 1) = g;
                    img.at(py, px, 2) = b;
                }
            }
        }
        x += 6;
    }
}

}  // namespace glyphs

// Labeled results matrix: rows sweep the first value, columns the second;
// missing cells are grayed out with a cross.
inline PixelImage assemble_contact_sheet(
    const SweepSpec& spec, int cell_size,
    const std::map<std::pair<int, int>, std::optional<PixelImage>>& cells) {
    const int top = 14;
    const int left = 52;
    const int pad = 2;
    int rows = static_cast<int>(spec.first.size());
    int cols = static_cast<int>(spec.second.size());
    PixelImage sheet(top + rows * (cell_size + pad), left + cols * (cell_size + pad), 1.0f);

    std::string a1(1, spec.axis), a2(1, spec.axis);
    a1 += "1=";
    a2 += "2=";
    for (int c = 0; c < cols; ++c) {
        glyphs::draw_text(sheet, 3, left + c * (cell_size + pad) + 2,
                          a2 + std::to_string(spec.second[static_cast<size_t>(c)]), 0, 0, 0);
    }
    for (int r = 0; r < rows; ++r) {
        glyphs::draw_text(sheet, top + r * (cell_size + pad) + cell_size / 2 - 3, 2,
                          a1 + std::to_string(spec.first[static_cast<size_t>(r)]), 0, 0, 0);
    }

    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            int oy = top + r * (cell_size + pad);
            int ox = left + c * (cell_size + pad);
            auto it = cells.find({spec.first[static_cast<size_t>(r)],
                                  spec.second[static_cast<size_t>(c)]});
            bool ok = it != cells.end() && it->second.has_value();
            for (int y = 0; y < cell_size; ++y) {
                for (int x = 0; x < cell_size; ++x) {
                    for (int ch = 0; ch < 3; ++ch) {
                        sheet.at(oy + y, ox + x, ch) = ok ? it->second->at(y, x, ch) : 0.55f;
                    }
                }
            }
            if (!ok) {
                // failed cell: diagonal cross
                for (int y = 0; y < cell_size; ++y) {
                    for (int d = -1; d <= 1; ++d) {
                        int x1 = std::clamp(y + d, 0, cell_size - 1);
                        int x2 = std::clamp(cell_size - 1 - y + d, 0, cell_size - 1);
                        sheet.at(oy + y, ox + x1, 0) = 0.9f;
                        sheet.at(oy + y, ox + x1, 1) = 0.1f;
                        sheet.at(oy + y, ox + x1, 2) = 0.1f;
                        sheet.at(oy + y, ox + x2, 0) = 0.9f;
                        sheet.at(oy + y, ox + x2, 1) = 0.1f;
                        sheet.at(oy + y, ox + x2, 2) = 0.1f;
                    }
                }
            }
        }
    }
    return sheet;
}

}  // namespace texrect
