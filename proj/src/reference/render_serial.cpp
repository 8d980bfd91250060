#include "prp/reference/serial.hpp"

namespace prp::serial {

RenderedView render_view(const SceneSpec& scene, const CameraIntrinsics& cam, const PoseSE3& pose, int frame_index) {
  scene.validate();
  cam.validate();
  RenderedView view{RgbImage(cam.width, cam.height), DepthMap(cam.width, cam.height), cam, pose, frame_index};
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const PixelSample s = render_pixel(scene, cam, pose, x, y);
      view.image(x, y) = s.color;
      if (s.valid) view.depth.set(x, y, s.depth);
    }
  return view;
}

}  // namespace prp::serial
