#pragma once

#include <optional>
#include <string>
#include <utility>

#include "nivtk/geometry.hpp"

namespace nivtk {

/// One predicted object: oriented box, classification confidence in [0, 1],
/// optional externally supplied predicted IoU in [0, 1], category label.
class Detection {
public:
    Detection(Box3D box, double confidence, std::string category,
              std::optional<double> predicted_iou = std::nullopt);

    const Box3D& box() const { return box_; }
    double confidence() const { return confidence_; }
    const std::optional<double>& predicted_iou() const { return predicted_iou_; }
    const std::string& category() const { return category_; }

    /// Copy with a replaced score; everything else unchanged.
    Detection with_confidence(double confidence) const {
        return Detection(box_, confidence, category_, predicted_iou_);
    }

private:
    Box3D box_;
    double confidence_;
    std::optional<double> predicted_iou_;
    std::string category_;
};

} // namespace nivtk
